//! Minimal reverse-mode autodiff with dense and 2D-convolution layers,
//! hosting the depth autoencoder, the policy network, and the value network.
//!
//! All arithmetic is 64-bit; checkpoints store 32-bit values.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod networks;
pub mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use gradcheck::finite_diff_check;
pub use graph::{Graph, NodeId};
pub use networks::{
    autoencoder_train_step, backward_and_step, encoder_forward, policy_forward, value_forward,
    ActionDistribution, ArchConfig, BoundParams, NetworkParameters,
};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("empty batch")]
    EmptyBatch,
}
