//! The adversarial imputer: generator, pattern discriminator, predictor and
//! the alternating training loop.

mod config;
mod hint;
mod model;
pub mod steps;
mod train;

pub use config::{DiscriminatorMode, FragmganConfig, LabelLoss};
pub use hint::{make_hint, mask_blocks, HintSampler, HintScheme, HintVector};
pub use model::{TraceRow, TrainedFragmgan, MODEL_KIND};
pub use steps::{generate, Batch, Generated};
pub use train::train;

use crate::data::DataError;
use crate::numeric::NumericError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("config: {0}")]
    Config(String),
    #[error("dataset has no response patterns")]
    EmptyPatterns,
    #[error("{phase} batch size {batch} exceeds the {n} training rows")]
    BatchTooLarge {
        phase: &'static str,
        batch: usize,
        n: usize,
    },
    #[error("labels are required when gamma < 1")]
    MissingLabels,
    #[error("training diverged at iteration {iteration} in the {phase} step: {detail}")]
    Divergence {
        iteration: usize,
        phase: &'static str,
        detail: String,
    },
    #[error("row {row}: mask {mask} is not a pattern the model was trained on")]
    UnknownPattern { row: usize, mask: String },
    #[error("model expects {expected} features, dataset has {got}")]
    FeatureCount { expected: usize, got: usize },
    #[error("model has no trained predictor")]
    NoPredictor,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

impl EngineError {
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            EngineError::Divergence { .. } | EngineError::Numeric(NumericError::NonFinite { .. })
        )
    }
}
