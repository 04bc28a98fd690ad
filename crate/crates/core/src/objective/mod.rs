//! Block-structured objectives.
//!
//! An objective exposes its value, full gradient and per-block gradients,
//! the block and full Lipschitz constants `L` and `L_r`, and optionally an
//! incrementally maintained residual cache. Caches are owned by the solver
//! state; objectives stay immutable.

mod dca_dual;
mod least_squares;
mod multi_agent;
mod prox;
mod quadratic;
mod quartic;

pub use dca_dual::{make_dca_dual, DcaDualObjective, Loss};
pub use least_squares::LeastSquares;
pub use multi_agent::{make_multi_agent, AgentCost, MultiAgentPenaltyObjective};
pub use prox::{ProxTerm, SeparableNonsmooth};
pub use quadratic::{make_quadratic, Quadratic};
pub use quartic::CoupledQuartic;

use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("matrix is not symmetric")]
    Asymmetric,
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Partition of `0..dim` into consecutive blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn scalar(n: usize) -> Self {
        Self { offsets: (0..=n).collect() }
    }

    pub fn from_dims(dims: &[usize]) -> Result<Self, ObjectiveError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(ObjectiveError::InvalidParameter("block dims must be positive".into()));
        }
        let mut offsets = vec![0];
        for d in dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        Ok(Self { offsets })
    }

    pub fn block_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_dim(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn is_scalar(&self) -> bool {
        self.block_count() == self.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Convex,
    Nonconvex,
}

/// Constants the analysis relies on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    /// Uniform block Lipschitz constant `L` (the maximum over blocks).
    pub block_lipschitz: f64,
    /// Lipschitz constant `L_r` of the full gradient.
    pub full_lipschitz: f64,
    /// Strong convexity modulus, when positive.
    pub strong_convexity: Option<f64>,
    /// `ν` in `f(x) − min f ≥ ν ‖x − proj_{argmin f}(x)‖²`.
    pub restricted_growth: Option<f64>,
    pub known_min: Option<f64>,
    pub convexity: Convexity,
}

impl Smoothness {
    /// `κ = L_r / L`.
    pub fn condition_number(&self) -> f64 {
        self.full_lipschitz / self.block_lipschitz
    }
}

/// Named vector maintained incrementally alongside the iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCache {
    pub name: &'static str,
    pub values: Vec<f64>,
}

pub trait BlockObjective: Send + Sync {
    fn layout(&self) -> &BlockLayout;
    fn smoothness(&self) -> &Smoothness;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn block_gradient(&self, x: &[f64], block: usize) -> Vec<f64> {
        self.gradient(x)[self.layout().range(block)].to_vec()
    }

    /// From-scratch cache for `x`; `None` when the objective keeps no cache.
    fn init_cache(&self, _x: &[f64]) -> Option<ResidualCache> {
        None
    }

    fn block_gradient_cached(
        &self,
        x: &[f64],
        _cache: Option<&ResidualCache>,
        block: usize,
    ) -> Vec<f64> {
        self.block_gradient(x, block)
    }

    /// Account for `x[block] += delta`.
    fn update_cache(&self, _cache: &mut ResidualCache, _block: usize, _delta: &[f64]) {}

    /// A certified lower bound on `inf f`; the exact minimum when known.
    fn lower_bound(&self) -> Option<f64> {
        self.smoothness().known_min
    }
}

impl<T: BlockObjective + ?Sized> BlockObjective for Box<T> {
    fn layout(&self) -> &BlockLayout {
        (**self).layout()
    }
    fn smoothness(&self) -> &Smoothness {
        (**self).smoothness()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).gradient(x)
    }
    fn block_gradient(&self, x: &[f64], block: usize) -> Vec<f64> {
        (**self).block_gradient(x, block)
    }
    fn init_cache(&self, x: &[f64]) -> Option<ResidualCache> {
        (**self).init_cache(x)
    }
    fn block_gradient_cached(&self, x: &[f64], cache: Option<&ResidualCache>, block: usize) -> Vec<f64> {
        (**self).block_gradient_cached(x, cache, block)
    }
    fn update_cache(&self, cache: &mut ResidualCache, block: usize, delta: &[f64]) {
        (**self).update_cache(cache, block, delta)
    }
    fn lower_bound(&self) -> Option<f64> {
        (**self).lower_bound()
    }
}

/// Largest normalized central-difference error over all coordinates:
/// `max_j |∂_j f(x) − FD_j f(x)| / (1 + |∂_j f(x)|)`.
pub fn gradient_check(obj: &dyn BlockObjective, x: &[f64], step: f64) -> f64 {
    let g = obj.gradient(x);
    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + step;
        let up = obj.value(&probe);
        probe[j] = x[j] - step;
        let down = obj.value(&probe);
        probe[j] = x[j];
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((g[j] - fd).abs() / (1.0 + g[j].abs()));
    }
    worst
}

/// Largest difference between `block_gradient` (and its cached variant)
/// and the corresponding slice of the full gradient.
pub fn block_consistency(obj: &dyn BlockObjective, x: &[f64]) -> f64 {
    let g = obj.gradient(x);
    let cache = obj.init_cache(x);
    let layout = obj.layout();
    let mut worst = 0.0_f64;
    for b in 0..layout.block_count() {
        let slice = &g[layout.range(b)];
        for bg in [obj.block_gradient(x, b), obj.block_gradient_cached(x, cache.as_ref(), b)] {
            for (u, v) in bg.iter().zip(slice) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts() {
        let l = BlockLayout::from_dims(&[2, 1, 3]).unwrap();
        assert_eq!(l.block_count(), 3);
        assert_eq!(l.dim(), 6);
        assert_eq!(l.range(2), 3..6);
        assert!(!l.is_scalar());
        assert!(BlockLayout::scalar(4).is_scalar());
        assert!(BlockLayout::from_dims(&[1, 0]).is_err());
    }
}
