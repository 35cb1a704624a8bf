//! Grid world: static environment map, unified target layer, UAV state and
//! the per-step dynamics shared by both missions.

mod episode;
pub mod los;
mod map;
mod target;
pub mod trajectory;

pub use episode::{
    Action, EpisodeState, MissionSummary, RewardBreakdown, RewardParams, StepOutcome,
};
pub use los::{field_of_view, line_of_sight, supercover_cells, FOV_RADIUS};
pub use map::{CellCode, EnvironmentMap, MapFile};
pub use target::{update_target_cpp, Mission, TargetMap};
