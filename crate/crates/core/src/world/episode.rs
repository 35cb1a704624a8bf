use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::{communication_slot, ChannelModel, IoTDevice};
use crate::error::{Error, Result};
use crate::grid::Position;

use super::los::field_of_view;
use super::map::EnvironmentMap;
use super::target::{update_target_cpp, Mission, TargetMap};

/// The six UAV actions. The discriminant is the Q-vector index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
    Hover = 4,
    Land = 5,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; 6] = [
        Action::North,
        Action::East,
        Action::South,
        Action::West,
        Action::Hover,
        Action::Land,
    ];

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::InvalidAction(index))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(d_row, d_col)` of a movement action.
    pub fn delta(self) -> Option<(i64, i64)> {
        match self {
            Action::North => Some((-1, 0)),
            Action::East => Some((0, 1)),
            Action::South => Some((1, 0)),
            Action::West => Some((0, -1)),
            Action::Hover | Action::Land => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::North => "north",
            Action::East => "east",
            Action::South => "south",
            Action::West => "west",
            Action::Hover => "hover",
            Action::Land => "land",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Reward per newly covered cell (CPP) or per collected data unit (DH).
    pub collection_scale: f64,
    /// Safety controller veto.
    pub safety_penalty: f64,
    /// Every non-terminal step.
    pub movement_penalty: f64,
    /// Flying time exhausted without landing.
    pub crash_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            collection_scale: 0.4,
            safety_penalty: -1.0,
            movement_penalty: -0.2,
            crash_penalty: -5.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.collection_scale > 0.0
            && self.safety_penalty < 0.0
            && self.movement_penalty < 0.0
            && self.crash_penalty < 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "reward signs: collection_scale must be > 0 and penalties < 0, got {self:?}"
            )))
        }
    }
}

/// Reward split into its components. `total()` is the only reward the
/// agent ever sees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub collection: f64,
    pub safety: f64,
    pub movement: f64,
    pub crash: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.collection + self.safety + self.movement + self.crash
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: bool,
    pub breakdown: RewardBreakdown,
    /// Safety controller blocked the action.
    pub vetoed: bool,
    /// Cells covered (CPP) or data collected (DH) this step.
    pub progress: f64,
    /// DH: device served this step.
    pub served_device: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub remaining_target: f64,
    pub initial_target: f64,
    pub landed: bool,
    pub crashed: bool,
    pub steps_used: u32,
}

/// Full simulator state `(M, D(t), p(t), b(t))` plus terminal flags.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    env: Arc<EnvironmentMap>,
    target: TargetMap,
    devices: Vec<IoTDevice>,
    position: Position,
    battery: u32,
    initial_battery: u32,
    initial_target: f64,
    steps: u32,
    landed: bool,
    crashed: bool,
    rewards: RewardParams,
}

impl EpisodeState {
    fn check_start(env: &EnvironmentMap, start: Position, battery: u32) -> Result<()> {
        start.check_on(env.size())?;
        if env.is_blocked(start) {
            return Err(Error::InvalidConfig(format!("start {start:?} is in a no-fly zone or obstacle")));
        }
        if battery == 0 {
            return Err(Error::InvalidConfig("initial battery must be positive".into()));
        }
        Ok(())
    }

    pub fn new_cpp(
        env: Arc<EnvironmentMap>,
        target: TargetMap,
        start: Position,
        battery: u32,
        rewards: RewardParams,
    ) -> Result<Self> {
        Self::check_start(&env, start, battery)?;
        if target.mission() != Mission::Cpp || target.size() != env.size() {
            return Err(Error::ShapeMismatch("CPP target does not fit the map".into()));
        }
        for p in env.cells() {
            let v = target.get(p);
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidConfig(format!("CPP target value {v} at {p:?}")));
            }
            if v != 0.0 && env.is_obstacle(p) {
                return Err(Error::InvalidConfig(format!("CPP target on obstacle {p:?}")));
            }
        }
        let initial_target = target.sum();
        Ok(Self {
            env,
            target,
            devices: Vec::new(),
            position: start,
            battery,
            initial_battery: battery,
            initial_target,
            steps: 0,
            landed: false,
            crashed: false,
            rewards,
        })
    }

    pub fn new_dh(
        env: Arc<EnvironmentMap>,
        devices: Vec<IoTDevice>,
        start: Position,
        battery: u32,
        rewards: RewardParams,
    ) -> Result<Self> {
        Self::check_start(&env, start, battery)?;
        let mut seen = std::collections::HashSet::new();
        for d in &devices {
            d.position.check_on(env.size())?;
            if env.is_obstacle(d.position) || env.is_landing(d.position) {
                return Err(Error::InvalidConfig(format!(
                    "device at {:?} is on an obstacle or landing cell",
                    d.position
                )));
            }
            if !seen.insert(d.position) {
                return Err(Error::InvalidConfig(format!("two devices share cell {:?}", d.position)));
            }
            if !(d.data_initial > 0.0) || d.data_remaining > d.data_initial || d.data_remaining < 0.0 {
                return Err(Error::InvalidConfig(format!("device data out of range: {d:?}")));
            }
        }
        let mut target = TargetMap::zeros(Mission::Dh, env.size());
        for d in &devices {
            target.set(d.position, d.data_remaining);
        }
        let initial_target = devices.iter().map(|d| d.data_initial).sum();
        Ok(Self {
            env,
            target,
            devices,
            position: start,
            battery,
            initial_battery: battery,
            initial_target,
            steps: 0,
            landed: false,
            crashed: false,
            rewards,
        })
    }

    pub fn env(&self) -> &EnvironmentMap {
        &self.env
    }

    pub fn env_arc(&self) -> &Arc<EnvironmentMap> {
        &self.env
    }

    pub fn mission(&self) -> Mission {
        self.target.mission()
    }

    pub fn target(&self) -> &TargetMap {
        &self.target
    }

    pub fn devices(&self) -> &[IoTDevice] {
        &self.devices
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn battery(&self) -> u32 {
        self.battery
    }

    pub fn initial_battery(&self) -> u32 {
        self.initial_battery
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn landed(&self) -> bool {
        self.landed
    }

    pub fn crashed(&self) -> bool {
        self.crashed
    }

    pub fn is_terminal(&self) -> bool {
        self.landed || self.crashed
    }

    pub fn rewards(&self) -> &RewardParams {
        &self.rewards
    }

    pub fn mission_state(&self) -> MissionSummary {
        MissionSummary {
            remaining_target: self.target.sum(),
            initial_target: self.initial_target,
            landed: self.landed,
            crashed: self.crashed,
            steps_used: self.steps,
        }
    }

    pub fn step_index(&mut self, action: usize, channel: Option<&mut ChannelModel>) -> Result<StepOutcome> {
        self.step(Action::from_index(action)?, channel)
    }

    /// Advances the episode by one action. DH episodes need the channel.
    pub fn step(&mut self, action: Action, channel: Option<&mut ChannelModel>) -> Result<StepOutcome> {
        if self.is_terminal() {
            return Err(Error::EpisodeFinished {
                landed: self.landed,
                crashed: self.crashed,
            });
        }
        if self.battery == 0 {
            return Err(Error::InvalidConfig("stepping with an empty battery".into()));
        }
        if self.mission() == Mission::Dh && channel.is_none() {
            return Err(Error::InvalidConfig("data harvesting step without a channel model".into()));
        }

        self.battery -= 1;
        self.steps += 1;
        let mut br = RewardBreakdown::default();
        let mut vetoed = false;

        match action {
            Action::Hover => {}
            Action::Land => {
                if self.env.is_landing(self.position) {
                    self.landed = true;
                } else {
                    vetoed = true;
                }
            }
            _ => {
                let (dr, dc) = action.delta().expect("movement action");
                match self.position.offset(dr, dc, self.env.size()) {
                    Some(next) if !self.env.is_blocked(next) => self.position = next,
                    _ => vetoed = true,
                }
            }
        }
        if vetoed {
            br.safety = self.rewards.safety_penalty;
        }

        if self.landed {
            return Ok(StepOutcome {
                reward: br.total(),
                terminal: true,
                breakdown: br,
                vetoed,
                progress: 0.0,
                served_device: None,
            });
        }

        let mut served_device = None;
        let progress = match self.mission() {
            Mission::Cpp => {
                let view = field_of_view(&self.env, self.position);
                update_target_cpp(&mut self.target, &view)? as f64
            }
            Mission::Dh => {
                let channel = channel.expect("checked above");
                let (served, collected) =
                    communication_slot(&mut self.devices, &self.env, self.position, channel)?;
                if let Some(k) = served {
                    let d = &self.devices[k];
                    self.target.set(d.position, d.data_remaining);
                }
                served_device = served;
                collected
            }
        };
        br.collection = self.rewards.collection_scale * progress;

        let terminal = self.battery == 0;
        if terminal {
            self.crashed = true;
            br.crash = self.rewards.crash_penalty;
        } else {
            br.movement = self.rewards.movement_penalty;
        }

        Ok(StepOutcome {
            reward: br.total(),
            terminal,
            breakdown: br,
            vetoed,
            progress,
            served_device,
        })
    }
}
