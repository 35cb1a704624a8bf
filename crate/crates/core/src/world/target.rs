use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Layers, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mission {
    /// Coverage path planning.
    Cpp,
    /// Data harvesting from IoT devices.
    Dh,
}

impl std::fmt::Display for Mission {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mission::Cpp => "cpp",
            Mission::Dh => "dh",
        })
    }
}

impl std::str::FromStr for Mission {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpp" => Ok(Mission::Cpp),
            "dh" => Ok(Mission::Dh),
            other => Err(Error::InvalidConfig(format!("unknown mission {other:?}"))),
        }
    }
}

/// Unified target layer: 1/0 per cell still to be covered (CPP) or the data
/// still held by the device in that cell (DH).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMap {
    mission: Mission,
    size: usize,
    values: Vec<f64>,
}

impl TargetMap {
    pub fn zeros(mission: Mission, size: usize) -> Self {
        Self {
            mission,
            size,
            values: vec![0.0; size * size],
        }
    }

    /// CPP target from a row-major boolean mask.
    pub fn from_mask(size: usize, mask: &[bool]) -> Result<Self> {
        if mask.len() != size * size {
            return Err(Error::ShapeMismatch(format!(
                "mask of {} cells for a {size}x{size} map",
                mask.len()
            )));
        }
        Ok(Self {
            mission: Mission::Cpp,
            size,
            values: mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        })
    }

    pub fn mission(&self) -> Mission {
        self.mission
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, p: Position) -> f64 {
        self.values[p.row * self.size + p.col]
    }

    pub(crate) fn set(&mut self, p: Position, value: f64) {
        self.values[p.row * self.size + p.col] = value;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Cells with a nonzero value.
    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn to_layers(&self) -> Layers {
        Layers::from_vec(1, self.size, self.values.clone()).expect("square target")
    }
}

/// Clears every target cell inside the view (`T <- T and not V`) and returns
/// the number of cells that were cleared.
pub fn update_target_cpp(target: &mut TargetMap, view: &[bool]) -> Result<usize> {
    if target.mission != Mission::Cpp {
        return Err(Error::InvalidConfig("coverage update on a DH target".into()));
    }
    if view.len() != target.values.len() {
        return Err(Error::ShapeMismatch(format!(
            "view has {} cells, target has {}",
            view.len(),
            target.values.len()
        )));
    }
    let mut cleared = 0;
    for (t, &seen) in target.values.iter_mut().zip(view) {
        if seen && *t != 0.0 {
            *t = 0.0;
            cleared += 1;
        }
    }
    Ok(cleared)
}
