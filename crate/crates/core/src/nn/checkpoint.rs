//! Versioned JSON checkpoint holding both parameter sets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{NetworkConfig, NetworkLayout, ParamBlock, QNetwork};
use crate::error::{Error, Result};
use crate::pipeline::ObservationSpec;

pub const CHECKPOINT_FORMAT: &str = "uavsim-qnet";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub network: NetworkConfig,
    pub spec: ObservationSpec,
    pub map_size: usize,
    pub blocks: Vec<ParamBlock>,
    pub online: Vec<f64>,
    pub target: Vec<f64>,
    #[serde(default)]
    pub steps_trained: u64,
}

impl Checkpoint {
    pub fn from_networks(online: &QNetwork, target: &QNetwork, steps_trained: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            network: online.config().clone(),
            spec: online.spec(),
            map_size: online.map_size(),
            blocks: online.layout().blocks().to_vec(),
            online: online.params().to_vec(),
            target: target.params().to_vec(),
            steps_trained,
        }
    }

    /// Rebuilds `(online, target)` after checking every recorded block
    /// against the layout implied by the stored configuration.
    pub fn networks(&self) -> Result<(QNetwork, QNetwork)> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let layout = NetworkLayout::new(&self.network, self.spec, self.map_size)?;
        if layout.blocks() != self.blocks.as_slice() {
            let diff = layout
                .blocks()
                .iter()
                .zip(&self.blocks)
                .find(|(a, b)| a != b)
                .map(|(want, got)| format!("block {}: expected shape {:?}, found {} {:?}", want.name, want.shape, got.name, got.shape))
                .unwrap_or_else(|| format!("expected {} blocks, found {}", layout.blocks().len(), self.blocks.len()));
            return Err(Error::Checkpoint(format!("shape mismatch: {diff}")));
        }
        let n = layout.parameter_count();
        for (name, v) in [("online", &self.online), ("target", &self.target)] {
            if v.len() != n {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch: {name} has {} parameters, layout needs {n}",
                    v.len()
                )));
            }
        }
        let online = QNetwork::from_params(self.network.clone(), self.spec, self.map_size, self.online.clone())?;
        let target = QNetwork::from_params(self.network.clone(), self.spec, self.map_size, self.target.clone())?;
        Ok((online, target))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json("checkpoint", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}
