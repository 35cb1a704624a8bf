//! Grid-world simulator and double deep Q-network trainer for UAV path
//! planning.
//!
//! Two missions share one observation pipeline and one network:
//! coverage path planning (CPP), where the UAV has to bring target cells
//! into its camera view, and data harvesting (DH), where it collects data
//! from ground IoT devices over a shadow-faded radio link.
//!
//! The agent never sees the raw map. The map and target layers are first
//! centered on the UAV, then split into an uncompressed local crop and an
//! average-pooled global view (see [`pipeline`]).

pub mod channel;
pub mod config;
pub mod ddqn;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod scenarios;
pub mod world;

pub use error::{Error, Result};
pub use grid::{Layers, Position};
pub use pipeline::{Observation, ObservationSpec};
pub use world::{Action, EnvironmentMap, EpisodeState, Mission, RewardParams, TargetMap};
