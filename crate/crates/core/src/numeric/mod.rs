//! Dense linear algebra, feedforward networks, losses and the optimizer that
//! every trainable component is built on.

mod checkpoint;
pub mod gradcheck;
pub mod loss;
mod matrix;
mod mlp;
mod optim;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use matrix::Matrix;
pub use mlp::{block_name, sigmoid, Activation, ForwardTrace, Layer, LayerGrad, Mlp, MlpGrads};
pub use optim::{Adam, Direction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite gradient in {block}")]
    NonFinite { block: String },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
