//! Rate constants, expectation envelopes and empirical rate estimates.
//!
//! Every envelope bounds an expectation, so comparisons are made against
//! seed-averaged curves with a normal-approximation band, never against
//! single paths.

mod conditional;
mod constants;
mod envelope;
mod fit;
mod stats;

pub use conditional::{conditional_bound_check, ConditionalReport};
pub use constants::{rate_constants, RateConstants};
pub use envelope::{
    compare_envelope, envelope_linear, envelope_nonconvex, envelope_sublinear, EnvelopeKind, EnvelopeReport,
    nonconvex_bound, LinearEnvelope, NoiseBudget, MIN_SEEDS, VIOLATION_FRACTION,
};
pub use fit::{fit_rate, FitKind, RateFit};
pub use stats::{log_grid, objective_error_curve, running_min_grad_sq, SeedAverage};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("step size {gamma} outside (0, 2/L = {limit})")]
    StepSize { gamma: f64, limit: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("curve value {value} at k = {k} is not positive")]
    NonPositive { k: f64, value: f64 },
    #[error("curves have different lengths or grids")]
    Mismatch,
}
