//! Run configuration file: one JSON document with every section needed for
//! training and evaluation, plus dotted `key=value` overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::channel::ChannelParams;
use crate::ddqn::{TrainConfig, TrainSetup};
use crate::error::{Error, Result};
use crate::evaluation::EvalSetup;
use crate::nn::NetworkConfig;
use crate::pipeline::ObservationSpec;
use crate::scenarios::{bundled_map, ScenarioConfig};
use crate::world::{EnvironmentMap, Mission, RewardParams};

/// Prefix selecting a map compiled into the library.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { episodes: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `scenario.mission`.
    pub mission: Mission,
    /// Map file relative to the config file, or `builtin:<name>`.
    pub map: String,
    pub observation: ObservationSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub scenario: ScenarioConfig,
    pub rewards: RewardParams,
    pub channel: ChannelParams,
    pub evaluation: EvalSection,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mission: Mission::Cpp,
            map: format!("{BUILTIN_PREFIX}manhattan32"),
            observation: ObservationSpec::new(17, 3),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            scenario: ScenarioConfig::default(),
            rewards: RewardParams::default(),
            channel: ChannelParams::default(),
            evaluation: EvalSection::default(),
            output_dir: None,
            seed: 0,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Sets `a.b.c` in a JSON tree. The value is parsed as JSON when possible
/// and taken as a plain string otherwise. Only existing keys can be set.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override key {key:?}: {part:?} is not inside an object")))?;
        if !obj.contains_key(*part) {
            return Err(Error::InvalidConfig(format!("override key {key:?}: unknown field {part:?}")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked above");
    }
    unreachable!("split yields at least one part")
}

impl RunConfig {
    /// Defaults, then the file (if any), then overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut tree = serde_json::to_value(RunConfig::default()).map_err(|e| Error::json("default config", e))?;
        let mut base_dir = PathBuf::from(".");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file: Value = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
            merge(&mut tree, file);
            base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(tree).map_err(|e| Error::json("run config", e))?;
        cfg.base_dir = base_dir;
        cfg.scenario.mission = cfg.mission;
        Ok(cfg)
    }

    pub fn map_path(&self) -> Option<PathBuf> {
        if self.map.starts_with(BUILTIN_PREFIX) {
            None
        } else {
            Some(self.base_dir.join(&self.map))
        }
    }

    pub fn load_map(&self) -> Result<Arc<EnvironmentMap>> {
        let env = match self.map.strip_prefix(BUILTIN_PREFIX) {
            Some(name) => bundled_map(name)?,
            None => EnvironmentMap::load(self.base_dir.join(&self.map))?,
        };
        Ok(Arc::new(env))
    }

    /// Loads the map and checks every section against it.
    pub fn train_setup(&self) -> Result<TrainSetup> {
        let env = self.load_map()?;
        let mut scenario = self.scenario.clone();
        scenario.mission = self.mission;
        scenario.map_name = env.name().to_string();
        let setup = TrainSetup {
            env,
            scenario,
            rewards: self.rewards.clone(),
            channel: self.channel.clone(),
            network: self.network.clone(),
            spec: self.observation,
            train: self.train.clone(),
            seed: self.seed,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn eval_setup(&self, episodes: usize, seed: u64, record_trajectories: bool) -> Result<EvalSetup> {
        let t = self.train_setup()?;
        Ok(EvalSetup {
            env: t.env,
            scenario: t.scenario,
            rewards: t.rewards,
            channel: t.channel,
            episodes,
            seed,
            record_trajectories,
        })
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
