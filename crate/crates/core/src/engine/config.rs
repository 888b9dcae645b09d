use serde::{Deserialize, Serialize};

use super::hint::HintScheme;
use super::EngineError;
use crate::data::LabelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminatorMode {
    /// K-way softmax over response patterns.
    #[default]
    Pattern,
    /// Per-coordinate sigmoid predicting the mask.
    #[serde(alias = "gain")]
    GainCoordinatewise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelLoss {
    /// Binary cross-entropy for binary labels, squared error otherwise.
    #[default]
    Auto,
    Squared,
    BinaryCe,
}

impl LabelLoss {
    pub fn resolve(self, kind: LabelKind) -> LabelLoss {
        match (self, kind) {
            (LabelLoss::Auto, LabelKind::Binary) => LabelLoss::BinaryCe,
            (LabelLoss::Auto, LabelKind::Continuous) => LabelLoss::Squared,
            (other, _) => other,
        }
    }
}

fn default_gamma() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    10.0
}
fn default_true() -> bool {
    true
}
fn default_noise() -> f64 {
    0.01
}
fn default_batch() -> usize {
    64
}
fn default_iterations() -> usize {
    10_000
}
fn default_window() -> usize {
    500
}
fn default_tolerance() -> f64 {
    1e-4
}
fn default_lr() -> f64 {
    1e-3
}
fn default_averaging() -> f64 {
    0.999
}

/// Training hyperparameters. Every field has a default, so an empty `[model]`
/// table is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragmganConfig {
    /// Weight of the imputation terms against the prediction loss.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Scale of the reconstruction loss on observed cells.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub hint: bool,
    #[serde(default)]
    pub hint_scheme: HintScheme,
    /// Standard deviation of the Gaussian noise fed to missing slots.
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    #[serde(default = "default_batch")]
    pub batch_g: usize,
    #[serde(default = "default_batch")]
    pub batch_d: usize,
    #[serde(default = "default_batch")]
    pub batch_p: usize,
    /// Outer iterations, each one discriminator, generator and predictor step.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Early stop once two consecutive windows of generator loss have means
    /// closer than `tolerance`.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub label_loss: LabelLoss,
    #[serde(default)]
    pub discriminator: DiscriminatorMode,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Decay of the exponential moving average of generator weights that
    /// becomes the trained generator; 0 keeps the last iterate.
    #[serde(default = "default_averaging")]
    pub generator_averaging: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for FragmganConfig {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            alpha: default_alpha(),
            hint: true,
            hint_scheme: HintScheme::Block,
            noise_scale: default_noise(),
            batch_g: default_batch(),
            batch_d: default_batch(),
            batch_p: default_batch(),
            iterations: default_iterations(),
            window: default_window(),
            tolerance: default_tolerance(),
            label_loss: LabelLoss::Auto,
            discriminator: DiscriminatorMode::Pattern,
            learning_rate: default_lr(),
            generator_averaging: default_averaging(),
            seed: 0,
        }
    }
}

impl FragmganConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return bad(format!(
                "noise_scale must be positive, got {}",
                self.noise_scale
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.generator_averaging) {
            return bad(format!(
                "generator_averaging must lie in [0, 1), got {}",
                self.generator_averaging
            ));
        }
        if self.batch_g == 0 || self.batch_d == 0 || self.batch_p == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.iterations == 0 || self.window == 0 {
            return bad("iterations and window must be positive".into());
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return bad(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            ));
        }
        Ok(())
    }
}
