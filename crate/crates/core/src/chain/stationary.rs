use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ChainError, TransitionSchedule};

/// Stationary row vector `π*` and its smallest entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    pub pi_min: f64,
}

impl StationaryDistribution {
    fn from_vec(pi: Vec<f64>) -> Result<Self, ChainError> {
        if let Some(i) = pi.iter().position(|&p| !(p > 0.0)) {
            return Err(ChainError::NotPositive(i));
        }
        let pi_min = pi.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { pi, pi_min })
    }

    /// The rank-one matrix `Π*` whose rows all equal `π*`.
    pub fn limit_matrix(&self) -> DMatrix<f64> {
        let n = self.pi.len();
        DMatrix::from_fn(n, n, |_, j| self.pi[j])
    }

    /// `‖π P − π‖₁`.
    pub fn residual(&self, p: &DMatrix<f64>) -> f64 {
        left_multiply(&self.pi, p)
            .iter()
            .zip(&self.pi)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Power-iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub max_iters: usize,
    /// Stop once successive iterates differ by less than this in ℓ1.
    pub tol: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self { max_iters: 1_000_000, tol: 1e-12 }
    }
}

/// `π*` by power iteration `π ← π P` from the uniform vector.
///
/// For a time-varying schedule the distribution is computed from the first
/// matrix and then verified against every other matrix.
pub fn stationary_distribution(
    schedule: &TransitionSchedule,
) -> Result<StationaryDistribution, ChainError> {
    stationary_distribution_with(schedule, PowerIteration::default())
}

pub fn stationary_distribution_with(
    schedule: &TransitionSchedule,
    opts: PowerIteration,
) -> Result<StationaryDistribution, ChainError> {
    let p = &schedule.matrices()[0];
    let n = p.nrows();
    let mut pi = vec![1.0 / n as f64; n];
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let mut next = left_multiply(&pi, p);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ChainError::NoConvergence(opts.max_iters));
    }
    if schedule.is_homogeneous() {
        StationaryDistribution::from_vec(pi)
    } else {
        verify_stationary(schedule, &pi, 1e-10)
    }
}

/// Check a caller-supplied `π*` against every matrix of the schedule.
pub fn verify_stationary(
    schedule: &TransitionSchedule,
    candidate: &[f64],
    tol: f64,
) -> Result<StationaryDistribution, ChainError> {
    let dist = StationaryDistribution::from_vec(candidate.to_vec())?;
    let total: f64 = candidate.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(ChainError::NotStationary { index: 0, residual: (total - 1.0).abs() });
    }
    for (index, p) in schedule.matrices().iter().enumerate() {
        let residual = dist.residual(p);
        if residual > tol {
            return Err(ChainError::NotStationary { index, residual });
        }
    }
    Ok(dist)
}

fn left_multiply(pi: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.ncols();
    (0..n)
        .map(|j| pi.iter().enumerate().map(|(i, &w)| w * p[(i, j)]).sum())
        .collect()
}
