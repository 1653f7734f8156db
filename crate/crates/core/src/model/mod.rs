//! Graph-convolution networks with explicit forward and reverse passes.

mod activation;
mod checkpoint;
mod gradcheck;
mod loss;
mod network;
mod tape;

pub use activation::Activation;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use gradcheck::{check_gradients, GradCheck, REL_FLOOR};
pub use loss::{masked_cross_entropy, LossOutput};
pub use network::{Model, ModelConfig, ModelGrads, ModelInput, DEFAULT_HIDDEN_DIM};
pub use tape::Tape;

use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("forward pass produced a non-finite value at layer {layer}")]
    ForwardDivergence { layer: usize },
    #[error("mask selects no nodes")]
    EmptyMask,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
