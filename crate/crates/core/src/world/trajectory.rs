//! Per-step trajectory records, written as JSON lines or as one document
//! per episode with the map and mission overlays needed for plotting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::IoTDevice;
use crate::error::{Error, Result};
use crate::grid::Position;

use super::episode::{Action, EpisodeState, StepOutcome};
use super::target::Mission;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    pub position: [usize; 2],
    pub action: Action,
    pub reward: f64,
    pub battery: u32,
    pub target_sum: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub served_device: Option<usize>,
}

impl StepRecord {
    pub fn after(state: &EpisodeState, t: u32, action: Action, outcome: &StepOutcome) -> Self {
        let p = state.position();
        Self {
            t,
            position: [p.row, p.col],
            action,
            reward: outcome.reward,
            battery: state.battery(),
            target_sum: state.target().sum(),
            served_device: outcome.served_device,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub map: String,
    pub mission: Mission,
    pub budget: u32,
    pub start: [usize; 2],
    /// CPP: row-major initial target mask.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_target: Vec<u8>,
    /// DH: devices with their initial data.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub devices: Vec<IoTDevice>,
    pub steps: Vec<StepRecord>,
    #[serde(default)]
    pub landed: bool,
    #[serde(default)]
    pub cr: f64,
}

impl Trajectory {
    pub fn begin(state: &EpisodeState) -> Self {
        let start: Position = state.position();
        let initial_target = match state.mission() {
            Mission::Cpp => state.target().values().iter().map(|&v| (v != 0.0) as u8).collect(),
            Mission::Dh => Vec::new(),
        };
        Self {
            map: state.env().name().to_string(),
            mission: state.mission(),
            budget: state.initial_battery(),
            start: [start.row, start.col],
            initial_target,
            devices: state.devices().to_vec(),
            steps: Vec::new(),
            landed: false,
            cr: 0.0,
        }
    }

    pub fn push(&mut self, record: StepRecord) {
        self.steps.push(record);
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.steps {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::json("trajectory", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
