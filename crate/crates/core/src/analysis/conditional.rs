use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::chain::{phi_product, stationary_distribution, ChainError, TransitionSchedule};
use crate::objective::BlockObjective;

/// Absolute-plus-relative slack allowed by the conditional bound check.
pub const CONDITIONAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub checked: usize,
    pub violations: usize,
    /// `min (lhs − rhs)` over all start states and offsets.
    pub min_margin: f64,
    /// `(m, i, lhs, rhs)` of the first violation.
    pub first_violation: Option<(usize, usize, f64, f64)>,
    pub pi_min: f64,
}

impl ConditionalReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// For each offset `m` and start state `i`, checks
/// `Σ_j [Φ(m, τ−1)]_{i,j} ‖∇_j f(x)‖² ≥ (π*_min/2) ‖∇f(x)‖²`.
pub fn conditional_bound_check(
    obj: &dyn BlockObjective,
    x: &[f64],
    schedule: &TransitionSchedule,
    tau: usize,
    offsets: Range<usize>,
) -> Result<ConditionalReport, ChainError> {
    assert!(tau >= 1, "tau must be at least 1");
    assert_eq!(obj.layout().block_count(), schedule.state_count(), "blocks and chain states differ");
    let pi_min = stationary_distribution(schedule)?.pi_min;
    let n = schedule.state_count();
    let block_sq: Vec<f64> = (0..n)
        .map(|j| obj.block_gradient(x, j).iter().map(|g| g * g).sum())
        .collect();
    let rhs = pi_min / 2.0 * block_sq.iter().sum::<f64>();
    let mut report = ConditionalReport {
        checked: 0,
        violations: 0,
        min_margin: f64::INFINITY,
        first_violation: None,
        pi_min,
    };
    for m in offsets {
        let phi = phi_product(schedule, m, tau - 1);
        for i in 0..n {
            let lhs: f64 = (0..n).map(|j| phi[(i, j)] * block_sq[j]).sum();
            report.checked += 1;
            report.min_margin = report.min_margin.min(lhs - rhs);
            if lhs < rhs - CONDITIONAL_TOL * (1.0 + rhs) {
                report.violations += 1;
                report.first_violation.get_or_insert((m, i, lhs, rhs));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_random_walk, internal_tau, Graph, WalkPolicy};
    use crate::objective::{make_quadratic, BlockLayout};
    use crate::rng::stream_rng;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn ring_quadratic(n: usize) -> impl BlockObjective {
        let q = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if (i + 1) % n == j || (j + 1) % n == i {
                -0.5
            } else {
                0.0
            }
        });
        make_quadratic(q, vec![0.3; n], BlockLayout::scalar(n)).unwrap()
    }

    #[test]
    fn ring_six_every_state_and_offset() {
        let graph = Graph::ring(6, true).unwrap();
        let schedule = build_random_walk(&graph, &WalkPolicy::Simple).unwrap();
        let tau = internal_tau(&schedule, 360).unwrap().tau;
        let obj = ring_quadratic(6);
        let mut rng = stream_rng(3, 0);
        for _ in 0..10 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let report = conditional_bound_check(&obj, &x, &schedule, tau, 0..21).unwrap();
            assert!(report.passed(), "{report:?}");
            assert_eq!(report.checked, 6 * 21);
        }
    }

    #[test]
    fn stationary_rows() {
        // P = Π*: lhs = Σ π_j g_j ≥ π_min Σ g_j
        let p = DMatrix::from_fn(3, 3, |_, j| [0.2, 0.3, 0.5][j]);
        let schedule = TransitionSchedule::from_matrix(p).unwrap();
        let obj = ring_quadratic(3);
        let x = [1.0, -1.0, 0.5];
        let report = conditional_bound_check(&obj, &x, &schedule, 1, 0..1).unwrap();
        let g: Vec<f64> = obj.gradient(&x).iter().map(|v| v * v).collect();
        let lhs = 0.2 * g[0] + 0.3 * g[1] + 0.5 * g[2];
        assert!((report.min_margin - (lhs - 0.1 * g.iter().sum::<f64>())).abs() < 1e-12);
        assert!(report.passed());
    }

    #[test]
    fn zero_gradient_is_tight() {
        let graph = Graph::ring(4, true).unwrap();
        let schedule = build_random_walk(&graph, &WalkPolicy::Simple).unwrap();
        let q = DMatrix::<f64>::identity(4, 4);
        let obj = make_quadratic(q, vec![0.0; 4], BlockLayout::scalar(4)).unwrap();
        let report = conditional_bound_check(&obj, &[0.0; 4], &schedule, 3, 0..5).unwrap();
        assert_eq!(report.min_margin, 0.0);
        assert!(report.passed());
    }

    #[test]
    fn too_short_horizon_can_fail() {
        // τ = 1 on a ring leaves zero entries in P, so a gradient living on
        // a non-neighbour block breaks the bound
        let graph = Graph::ring(6, false).unwrap();
        let schedule = build_random_walk(&graph, &WalkPolicy::Simple).unwrap();
        let obj = make_quadratic(DMatrix::identity(6, 6), vec![0.0; 6], BlockLayout::scalar(6)).unwrap();
        let mut x = [0.0; 6];
        x[3] = 1.0;
        let report = conditional_bound_check(&obj, &x, &schedule, 1, 0..1).unwrap();
        assert!(!report.passed());
    }
}
