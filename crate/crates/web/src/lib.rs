//! Browser bindings: step a scenario with its field of view, inspect the
//! local and global observation for any `(l, g)`, and size networks.
//!
//! [`Session`] and the free functions are plain Rust so they can be tested
//! natively; the `wasm_bindgen` layer only converts errors and JSON.

use std::sync::Arc;

use serde::Serialize;
use uavsim::channel::{ChannelModel, ChannelParams, IoTDevice};
use uavsim::nn::NetworkConfig;
use uavsim::pipeline::assemble_observation;
use uavsim::rng::{derive_seed, stream, stream_rng};
use uavsim::scenarios::{bundled_map, new_episode, ScenarioConfig};
use uavsim::world::{field_of_view, Action, EnvironmentMap, EpisodeState, Mission, RewardParams};
use uavsim::{ObservationSpec, Result};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Serialize)]
pub struct View {
    pub size: usize,
    /// Row-major cell codes: `.` free, `L` landing, `N` no-fly, `#` obstacle.
    pub cells: Vec<&'static str>,
    pub mission: Mission,
    pub position: [usize; 2],
    pub battery: u32,
    pub budget: u32,
    pub steps: u32,
    /// CPP: remaining target cells as 0/1. DH: empty.
    pub target: Vec<u8>,
    pub devices: Vec<IoTDevice>,
    /// Cells inside the camera field of view (CPP only).
    pub fov: Vec<bool>,
    pub landed: bool,
    pub crashed: bool,
    pub terminal: bool,
    pub collected_ratio: f64,
    pub last_reward: f64,
    pub reward_sum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservationView {
    pub channels: usize,
    pub local_side: usize,
    pub global_side: usize,
    /// Channel-major planes.
    pub local: Vec<f32>,
    pub global: Vec<f32>,
    pub flatten_size: usize,
}

/// One interactive episode on a bundled map.
pub struct Session {
    env: Arc<EnvironmentMap>,
    scenario: ScenarioConfig,
    rewards: RewardParams,
    channel_params: ChannelParams,
    state: EpisodeState,
    channel: Option<ChannelModel>,
    seed: u64,
    last_reward: f64,
    reward_sum: f64,
}

impl Session {
    pub fn new(map: &str, mission: Mission, seed: u64) -> Result<Self> {
        let env = Arc::new(bundled_map(map)?);
        let scenario = ScenarioConfig {
            mission,
            map_name: map.to_string(),
            ..ScenarioConfig::default()
        };
        scenario.validate()?;
        let rewards = RewardParams::default();
        let channel_params = ChannelParams::default();
        let state = new_episode(&env, &scenario, &rewards, &mut stream_rng(seed, stream::SCENARIO))?;
        let channel = (mission == Mission::Dh)
            .then(|| ChannelModel::with_seed(channel_params.clone(), derive_seed(seed, stream::CHANNEL)));
        Ok(Self {
            env,
            scenario,
            rewards,
            channel_params,
            state,
            channel,
            seed,
            last_reward: 0.0,
            reward_sum: 0.0,
        })
    }

    /// Starts a fresh episode on the same map and mission.
    pub fn reset(&mut self, seed: u64) -> Result<()> {
        self.state = new_episode(&self.env, &self.scenario, &self.rewards, &mut stream_rng(seed, stream::SCENARIO))?;
        self.channel = (self.scenario.mission == Mission::Dh)
            .then(|| ChannelModel::with_seed(self.channel_params.clone(), derive_seed(seed, stream::CHANNEL)));
        self.seed = seed;
        self.last_reward = 0.0;
        self.reward_sum = 0.0;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn step(&mut self, action: usize) -> Result<()> {
        let out = self.state.step(Action::from_index(action)?, self.channel.as_mut())?;
        self.last_reward = out.reward;
        self.reward_sum += out.reward;
        Ok(())
    }

    pub fn view(&self) -> View {
        let s = &self.state;
        let p = s.position();
        let summary = s.mission_state();
        let collected_ratio = if summary.initial_target > 0.0 {
            1.0 - summary.remaining_target / summary.initial_target
        } else {
            1.0
        };
        View {
            size: self.env.size(),
            cells: self.env.cells().map(|c| self.env.code(c).as_str()).collect(),
            mission: s.mission(),
            position: [p.row, p.col],
            battery: s.battery(),
            budget: s.initial_battery(),
            steps: s.steps(),
            target: match s.mission() {
                Mission::Cpp => s.target().values().iter().map(|&v| (v != 0.0) as u8).collect(),
                Mission::Dh => Vec::new(),
            },
            devices: s.devices().to_vec(),
            fov: match s.mission() {
                Mission::Cpp => field_of_view(&self.env, p),
                Mission::Dh => Vec::new(),
            },
            landed: s.landed(),
            crashed: s.crashed(),
            terminal: s.is_terminal(),
            collected_ratio,
            last_reward: self.last_reward,
            reward_sum: self.reward_sum,
        }
    }

    pub fn observe(&self, local_size: usize, global_scaling: usize) -> Result<ObservationView> {
        let spec = ObservationSpec::new(local_size, global_scaling);
        spec.validate(self.env.size())?;
        let obs = assemble_observation(&self.state, spec)?;
        let planes = |data: &[f32], side: usize| if side == 0 { 0 } else { data.len() / (side * side) };
        let channels = planes(&obs.global, obs.global_side).max(planes(&obs.local, obs.local_side));
        let net = NetworkConfig::default();
        Ok(ObservationView {
            channels,
            local_side: obs.local_side,
            global_side: obs.global_side,
            local: obs.local,
            global: obs.global,
            flatten_size: uavsim::pipeline::flatten_size(spec, self.env.size(), net.n_kernels, net.n_conv_layers, net.kernel_size)
                .unwrap_or(0),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sizing {
    pub flatten_size: usize,
    pub parameter_count: usize,
    pub local_side: usize,
    pub global_side: usize,
}

/// Flatten width and parameter count of the Q-network for one setting.
pub fn sizing(
    map_size: usize,
    local_size: usize,
    global_scaling: usize,
    n_conv: usize,
    n_kernels: usize,
    kernel_size: usize,
    hidden: &[usize],
    input_channels: usize,
) -> Result<Sizing> {
    let spec = ObservationSpec::new(local_size, global_scaling);
    spec.validate(map_size)?;
    let cfg = NetworkConfig {
        n_conv_layers: n_conv,
        n_kernels,
        kernel_size,
        hidden_sizes: hidden.to_vec(),
        input_channels,
        ..NetworkConfig::default()
    };
    Ok(Sizing {
        flatten_size: uavsim::pipeline::flatten_size(spec, map_size, n_kernels, n_conv, kernel_size)?,
        parameter_count: uavsim::nn::parameter_count(&cfg, spec, map_size)?,
        local_side: local_size,
        global_side: spec.global_side(map_size),
    })
}

pub fn parse_mission(s: &str) -> Result<Mission> {
    match s.to_ascii_lowercase().as_str() {
        "cpp" => Ok(Mission::Cpp),
        "dh" => Ok(Mission::Dh),
        other => Err(uavsim::Error::InvalidConfig(format!("unknown mission {other:?}"))),
    }
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<String, JsError> {
    serde_json::to_string(v).map_err(js)
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(map: &str, mission: &str, seed: u32) -> std::result::Result<Demo, JsError> {
        let mission = parse_mission(mission).map_err(js)?;
        Ok(Demo {
            inner: Session::new(map, mission, seed as u64).map_err(js)?,
        })
    }

    pub fn reset(&mut self, seed: u32) -> std::result::Result<(), JsError> {
        self.inner.reset(seed as u64).map_err(js)
    }

    /// Actions: 0 north, 1 east, 2 south, 3 west, 4 hover, 5 land.
    pub fn step(&mut self, action: usize) -> std::result::Result<String, JsError> {
        self.inner.step(action).map_err(js)?;
        to_json(&self.inner.view())
    }

    pub fn view(&self) -> std::result::Result<String, JsError> {
        to_json(&self.inner.view())
    }

    pub fn observe(&self, local_size: usize, global_scaling: usize) -> std::result::Result<String, JsError> {
        to_json(&self.inner.observe(local_size, global_scaling).map_err(js)?)
    }
}

/// `hidden` is a comma-separated list of widths.
#[wasm_bindgen(js_name = networkSizing)]
#[allow(clippy::too_many_arguments)]
pub fn network_sizing(
    map_size: usize,
    local_size: usize,
    global_scaling: usize,
    n_conv: usize,
    n_kernels: usize,
    kernel_size: usize,
    hidden: &str,
    input_channels: usize,
) -> std::result::Result<String, JsError> {
    let hidden: Vec<usize> = hidden
        .split(',')
        .map(|h| h.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| js(format!("hidden sizes: {e}")))?;
    let s = sizing(map_size, local_size, global_scaling, n_conv, n_kernels, kernel_size, &hidden, input_channels)
        .map_err(js)?;
    to_json(&s)
}
