//! Adversarial imputation of block-wise missing tabular data.
//!
//! A generator fills the missing cells of each row, a discriminator tries to
//! tell which response pattern a completed row came from, and a predictor is
//! trained on the completed rows at the same time. The `gamma` weight links
//! imputation and prediction: `gamma = 1` is pure imputation followed by
//! post-hoc prediction, smaller values let the prediction loss shape the
//! imputations.

pub mod amputer;
pub mod data;
pub mod engine;
pub mod harness;
pub mod numeric;
pub mod seed;
pub mod synth;
