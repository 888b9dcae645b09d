//! Experiment orchestration: metrics, cross-validation of the adjusting factor,
//! repeated-split experiments and miss-rate sweeps.

mod config;
mod cv;
mod experiment;
mod metrics;

pub use config::{ExperimentConfig, GammaSetting, RunConfig};
pub use cv::{cross_validate_gamma, default_grid, CvCriterion, CvReport, CvSpec, GammaScore};
pub use experiment::{
    prepare_repetition, repetition_seed, run_experiment, run_repetition, run_sweep, write_results,
    write_sweep_csv, ExperimentSpec, GammaPolicy, Metric, MetricSummary, PreparedRepetition,
    RepetitionOutcome, RepetitionResult, ResultTable, SweepRow,
};
pub use metrics::{auc, column_means, mean_impute, rmse, rmse_imputation};

use crate::amputer::AmputeError;
use crate::data::DataError;
use crate::engine::EngineError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("metric: {0}")]
    Metric(String),
    #[error(
        "cross-validation fold {fold} leaves {rows} training rows, fewer than batch size {batch}"
    )]
    FoldTooSmall {
        fold: usize,
        rows: usize,
        batch: usize,
    },
    #[error("i/o: {0}")]
    Io(String),
    #[error("repetition {repetition} failed: {source}")]
    Aborted {
        repetition: usize,
        source: Box<HarnessError>,
        partial: Box<ResultTable>,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Ampute(#[from] AmputeError),
}

impl HarnessError {
    /// The underlying failure, looking through `Aborted`.
    pub fn root(&self) -> &HarnessError {
        match self {
            HarnessError::Aborted { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self.root(), HarnessError::Engine(e) if e.is_divergence())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
