//! Two-branch convolutional Q-network with hand-written backpropagation.

mod checkpoint;
mod conv;
mod gemm;
mod network;
mod policy;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{
    parameter_count, Branch, ForwardPass, NetworkConfig, NetworkLayout, ParamBlock, QNetwork, QValues,
};
pub use policy::{argmax, sample_action, softmax, Policy};
