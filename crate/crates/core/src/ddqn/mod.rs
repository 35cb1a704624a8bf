//! Double DQN: combined experience replay, double-Q targets, Adam updates
//! of the online network and soft updates of the target network.

mod optim;
mod replay;
mod target;
mod trainer;

pub use optim::Adam;
pub use replay::{Experience, ReplayMemory};
pub use target::{td_targets, vanilla_targets, QFunction};
pub(crate) use trainer::csv_error;
pub use trainer::{train, train_step, TrainConfig, TrainLogRow, TrainOutcome, TrainSetup, Trainer};
