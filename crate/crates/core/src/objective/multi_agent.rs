use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BlockLayout, BlockObjective, Convexity, ObjectiveError, ResidualCache, Smoothness};
use crate::linalg::spectral_norm;

/// Private cost of one agent, `f_i(t) = ½ curvature·t² + linear·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentCost {
    pub curvature: f64,
    pub linear: f64,
}

/// `Σ_i f_i(x_i) + (β/2)‖max{Ax − b, 0}‖²` over scalar agent decisions.
#[derive(Debug, Clone)]
pub struct MultiAgentPenaltyObjective {
    costs: Vec<AgentCost>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    beta: f64,
    layout: BlockLayout,
    smoothness: Smoothness,
}

pub fn make_multi_agent(
    costs: Vec<AgentCost>,
    a: DMatrix<f64>,
    b: Vec<f64>,
    beta: f64,
) -> Result<MultiAgentPenaltyObjective, ObjectiveError> {
    if !(beta > 0.0) {
        return Err(ObjectiveError::InvalidParameter(format!("penalty weight {beta} must be positive")));
    }
    if a.ncols() != costs.len() || a.nrows() != b.len() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "A is {}x{}, {} agents, {} resources",
            a.nrows(),
            a.ncols(),
            costs.len(),
            b.len()
        )));
    }
    if costs.iter().any(|c| !(c.curvature >= 0.0)) {
        return Err(ObjectiveError::InvalidParameter("agent curvatures must be nonnegative".into()));
    }
    let max_cost = costs.iter().map(|c| c.curvature).fold(0.0, f64::max);
    let min_cost = costs.iter().map(|c| c.curvature).fold(f64::INFINITY, f64::min);
    let max_col = (0..a.ncols()).map(|j| a.column(j).norm_squared()).fold(0.0, f64::max);
    let smoothness = Smoothness {
        block_lipschitz: max_cost + beta * max_col,
        full_lipschitz: max_cost + beta * spectral_norm(&a).powi(2),
        strong_convexity: (min_cost > 0.0).then_some(min_cost),
        restricted_growth: (min_cost > 0.0).then_some(0.5 * min_cost),
        known_min: None,
        convexity: Convexity::Convex,
    };
    let layout = BlockLayout::scalar(costs.len());
    Ok(MultiAgentPenaltyObjective { costs, a, b: DVector::from_vec(b), beta, layout, smoothness })
}

impl MultiAgentPenaltyObjective {
    fn usage_excess(&self, x: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(x) - &self.b
    }

    fn cost_gradient(&self, x: &[f64], i: usize) -> f64 {
        self.costs[i].curvature * x[i] + self.costs[i].linear
    }

    fn penalty_gradient(&self, v: &[f64], i: usize) -> f64 {
        self.beta * self.a.column(i).iter().zip(v).map(|(a, v)| a * v.max(0.0)).sum::<f64>()
    }

    /// `βAᵀ max{Ax − b, 0}`.
    pub fn penalty_gradient_full(&self, x: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = self.usage_excess(x).iter().copied().collect();
        (0..self.costs.len()).map(|i| self.penalty_gradient(&v, i)).collect()
    }
}

impl BlockObjective for MultiAgentPenaltyObjective {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn value(&self, x: &[f64]) -> f64 {
        let cost: f64 = self
            .costs
            .iter()
            .zip(x)
            .map(|(c, &t)| 0.5 * c.curvature * t * t + c.linear * t)
            .sum();
        let excess: f64 = self.usage_excess(x).iter().map(|v| v.max(0.0).powi(2)).sum();
        cost + 0.5 * self.beta * excess
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = self.usage_excess(x).iter().copied().collect();
        (0..self.costs.len())
            .map(|i| self.cost_gradient(x, i) + self.penalty_gradient(&v, i))
            .collect()
    }

    fn init_cache(&self, x: &[f64]) -> Option<ResidualCache> {
        Some(ResidualCache { name: "Ax-b", values: self.usage_excess(x).iter().copied().collect() })
    }

    fn block_gradient_cached(&self, x: &[f64], cache: Option<&ResidualCache>, block: usize) -> Vec<f64> {
        match cache {
            Some(c) => vec![self.cost_gradient(x, block) + self.penalty_gradient(&c.values, block)],
            None => self.block_gradient(x, block),
        }
    }

    fn update_cache(&self, cache: &mut ResidualCache, block: usize, delta: &[f64]) {
        for (v, a) in cache.values.iter_mut().zip(self.a.column(block).iter()) {
            *v += a * delta[0];
        }
    }

    /// Sum of the separately minimized costs; the penalty is nonnegative.
    fn lower_bound(&self) -> Option<f64> {
        let mut total = 0.0;
        for c in &self.costs {
            if c.curvature > 0.0 {
                total -= 0.5 * c.linear * c.linear / c.curvature;
            } else if c.linear != 0.0 {
                return None;
            }
        }
        Some(total)
    }
}
