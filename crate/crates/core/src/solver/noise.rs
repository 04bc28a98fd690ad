use std::fmt;
use std::sync::Arc;

use super::{SolverError, StepContext};
use crate::rng::{uniform_ball, unit_direction, StreamRng};

type NoiseFn = dyn Fn(usize, usize, &mut StreamRng) -> Vec<f64> + Send + Sync;

/// Additive error `ε^k` on the selected block's gradient.
#[derive(Clone)]
pub enum NoiseModel {
    None,
    /// `‖ε^k‖ = σ₀/(k+1)` in a uniformly random direction, so that
    /// `Σ_k ‖ε^k‖² = σ₀² π²/6`.
    SquareSummable { sigma0: f64 },
    /// Uniform in the ball `‖ε^k‖² ≤ level`.
    Bounded { level: f64 },
    /// `(k, block_dim, rng) ↦ ε^k`.
    Custom(Arc<NoiseFn>),
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::None => write!(f, "None"),
            NoiseModel::SquareSummable { sigma0 } => write!(f, "SquareSummable {{ sigma0: {sigma0} }}"),
            NoiseModel::Bounded { level } => write!(f, "Bounded {{ level: {level} }}"),
            NoiseModel::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), SolverError> {
        match *self {
            NoiseModel::SquareSummable { sigma0 } if !(sigma0 >= 0.0 && sigma0.is_finite()) => {
                Err(SolverError::Config(format!("noise scale {sigma0} must be nonnegative")))
            }
            NoiseModel::Bounded { level } if !(level >= 0.0 && level.is_finite()) => {
                Err(SolverError::Config(format!("noise level {level} must be nonnegative")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseModel::None)
    }

    /// `𝓔 = Σ_k ‖ε^k‖²` when it is finite and known in closed form.
    pub fn total_energy(&self) -> Option<f64> {
        match *self {
            NoiseModel::None => Some(0.0),
            NoiseModel::SquareSummable { sigma0 } => {
                Some(sigma0 * sigma0 * std::f64::consts::PI.powi(2) / 6.0)
            }
            _ => None,
        }
    }

    /// `S` with `‖ε^k‖² ≤ S` for every `k`.
    pub fn level(&self) -> Option<f64> {
        match *self {
            NoiseModel::None => Some(0.0),
            NoiseModel::SquareSummable { sigma0 } => Some(sigma0 * sigma0),
            NoiseModel::Bounded { level } => Some(level),
            NoiseModel::Custom(_) => None,
        }
    }

    pub fn sample(&self, k: usize, dim: usize, rng: &mut StreamRng) -> Option<Vec<f64>> {
        match self {
            NoiseModel::None => None,
            NoiseModel::SquareSummable { sigma0 } => {
                let scale = sigma0 / (k as f64 + 1.0);
                Some(unit_direction(dim, rng).into_iter().map(|v| v * scale).collect())
            }
            NoiseModel::Bounded { level } => Some(uniform_ball(dim, level.sqrt(), rng)),
            NoiseModel::Custom(f) => Some(f(k, dim, rng)),
        }
    }
}

/// Source of `ε^k`, consulted once per step after the block is chosen.
pub trait Perturbation {
    fn perturb(&mut self, ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError>;
}

impl<F> Perturbation for F
where
    F: FnMut(&StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError>,
{
    fn perturb(&mut self, ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError> {
        self(ctx)
    }
}

/// Exact gradients.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPerturbation;

impl Perturbation for NoPerturbation {
    fn perturb(&mut self, _ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError> {
        Ok(None)
    }
}

/// Draws from a [`NoiseModel`] on its own stream.
#[derive(Debug, Clone)]
pub struct ModelNoise {
    model: NoiseModel,
    rng: StreamRng,
}

impl ModelNoise {
    pub fn new(model: NoiseModel, rng: StreamRng) -> Self {
        Self { model, rng }
    }
}

impl Perturbation for ModelNoise {
    fn perturb(&mut self, ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError> {
        Ok(self.model.sample(ctx.k, ctx.gradient.len(), &mut self.rng))
    }
}
