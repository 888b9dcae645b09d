//! Exact checks of pattern-discriminator identifiability on finite
//! distributions.
//!
//! An instance is a joint table `p(xᵒ, xᵐ, W)` over small discrete domains. A
//! generator is summarized by the conditional it induces on imputed values,
//! `q_k(x̂ᵐ | xᵒ)` for each pattern `k`. Everything the adversarial game depends
//! on (the optimal discriminator, the generator objective, the fixed points)
//! can then be enumerated exactly.

mod discriminator;
mod gain;
mod generator;
mod identifiability;
mod instance;
mod objective;
mod simplex;
mod suite;

pub use discriminator::{
    discriminator_value, numeric_discriminator, optimal_discriminator, posterior_check,
    DiscriminatorTable, PosteriorCheck,
};
pub use gain::{
    verify_gain_mar, GainCell, GainGenerator, GainInstance, GainInstanceFile, GainReport,
};
pub use generator::{induced_joint, DiscreteGenerator};
pub use identifiability::{
    generator_family, mnar_counterexample, solve_shared, verify_minimizers, verify_recovery,
    Counterexample, MinimizerReport, RecoveryReport,
};
pub use instance::{
    random_simplex, DiscreteInstance, InstanceFile, MarViolation, Mechanism, RandomInstance,
};
pub use objective::{c_of_g, imputed_conditional, shared_deviation, CValue};
pub use simplex::maximize_on_simplex;
pub use suite::{run_suite, CheckLine, SuiteConfig, TheoryFile};

/// Tolerance for "sums to one" and for exact-equality checks.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("imputed cell (xo={xo}, xm={xm}) has zero probability")]
    ZeroProbability { xo: usize, xm: usize },
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("xo={xo} has positive probability but never occurs with the complete pattern")]
    NotIdentified { xo: usize },
    #[error("parse: {0}")]
    Parse(String),
}
