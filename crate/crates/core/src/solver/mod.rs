//! The coordinate iteration engine.
//!
//! One step selects a block `i_k`, evaluates `∇_{i_k} f(x^k)` (through the
//! objective's residual cache when it has one), adds an optional error
//! `ε^k` and moves only that block:
//!
//! ```text
//! x^{k+1}_{i_k} = prox_{γ g_{i_k}}( x^k_{i_k} − γ (∇_{i_k} f(x^k) + ε^k) )
//! ```
//!
//! with the identity in place of the prox for smooth problems.

mod audit;
mod engine;
mod noise;
mod trace;

pub use audit::{
    step_sum_audit, delayed_gradient_audit, pathwise_audit, prox_descent_audit, prox_grad_residual,
    AuditReport, PathwiseAudit,
};
pub use engine::{chain_sampler, mcbcd_step, mcpbcd_step, run, IterateState, Solver, StepContext};
pub use noise::{ModelNoise, NoPerturbation, NoiseModel, Perturbation};
pub use trace::{CacheAudit, StepInfo, StopReason, Trace, TraceRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::ChainError;
use crate::objective::{ObjectiveError, Smoothness};

/// Relative drift above which a residual cache audit is reported.
pub const CACHE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("step size {gamma} outside (0, {limit})")]
    InvalidStepSize { gamma: f64, limit: f64 },
    #[error("non-finite gradient at iteration {k}, block {block}")]
    NonFiniteGradient { k: usize, block: usize },
    #[error("non-finite noise at iteration {k}, block {block}")]
    NonFiniteNoise { k: usize, block: usize },
    #[error("block {block} out of range for {count} blocks")]
    BlockOutOfRange { block: usize, count: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("oracle failure at iteration {k}: {reason}")]
    Oracle { k: usize, reason: String },
    #[error("trace does not retain iterates")]
    MissingIterates,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Invalid(SolverError),
    #[error("run aborted after {} iterations: {error}", .partial.iterations())]
    Aborted {
        #[source]
        error: SolverError,
        partial: Box<Trace>,
    },
}

impl RunError {
    pub fn error(&self) -> &SolverError {
        match self {
            RunError::Invalid(e) | RunError::Aborted { error: e, .. } => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopRule {
    IterCap,
    /// Stop once `‖∇f(x^k)‖ ≤ tol` at a recorded iteration.
    GradNorm { tol: f64 },
    /// Stop once `F(x^k) − lower bound ≤ tol` at a recorded iteration.
    ObjectiveGap { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBlock {
    /// Draw `i_0` from the chain's stationary distribution.
    Stationary,
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub noise: NoiseModel,
    pub stop: StopRule,
    /// Record every this many iterations; the final iterate is always recorded.
    pub record_every: usize,
    pub initial_block: InitialBlock,
    /// Defaults to the zero vector.
    pub initial_point: Option<Vec<f64>>,
    pub store_iterates: bool,
    /// Residual caches are compared against a fresh computation and resynced
    /// every this many iterations; 0 disables the audit.
    pub audit_every: usize,
}

impl SolverConfig {
    pub fn new(step_size: f64, max_iters: usize) -> Self {
        Self {
            step_size,
            max_iters,
            noise: NoiseModel::None,
            stop: StopRule::IterCap,
            record_every: 1,
            initial_block: InitialBlock::Stationary,
            initial_point: None,
            store_iterates: false,
            audit_every: 1000,
        }
    }

    /// Smooth steps need `γ ∈ (0, 2/L)`, proximal steps `γ ∈ (0, 1/L)`.
    pub fn validate(&self, smoothness: &Smoothness, proximal: bool) -> Result<(), SolverError> {
        let l = smoothness.block_lipschitz;
        let limit = if proximal { 1.0 / l } else { 2.0 / l };
        if !(self.step_size > 0.0 && self.step_size < limit) {
            return Err(SolverError::InvalidStepSize { gamma: self.step_size, limit });
        }
        if self.record_every == 0 {
            return Err(SolverError::Config("record_every must be positive".into()));
        }
        self.noise.validate()
    }
}
