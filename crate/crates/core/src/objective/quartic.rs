use super::{BlockLayout, BlockObjective, Convexity, ObjectiveError, Smoothness};
use crate::linalg::symmetric_eigenvalues;
use nalgebra::DMatrix;

/// Double-well sum with ring coupling,
/// `f(x) = Σ_i q(x_i) + (c/2) Σ_i (x_i − x_{i+1})²`, indices mod `N`.
///
/// `q(t) = ¼(t² − 1)²` on `|t| ≤ B` and its second-order Taylor extension
/// beyond, which keeps `q''` bounded by `3B² − 1` everywhere so that the
/// stated Lipschitz constants hold globally. The minimum value is 0,
/// attained at `±(1, …, 1)`.
#[derive(Debug, Clone)]
pub struct CoupledQuartic {
    n: usize,
    cutoff: f64,
    coupling: f64,
    layout: BlockLayout,
    smoothness: Smoothness,
}

impl CoupledQuartic {
    pub fn new(n: usize, cutoff: f64, coupling: f64) -> Result<Self, ObjectiveError> {
        if n == 0 {
            return Err(ObjectiveError::InvalidParameter("need at least one block".into()));
        }
        if !(cutoff >= 1.0) || !(coupling >= 0.0) {
            return Err(ObjectiveError::InvalidParameter(format!(
                "cutoff {cutoff} must be ≥ 1 and coupling {coupling} nonnegative"
            )));
        }
        let curvature = 3.0 * cutoff * cutoff - 1.0;
        let lap = ring_laplacian(n);
        let lap_max = symmetric_eigenvalues(&lap).last().copied().unwrap_or(0.0);
        let lap_diag = lap.diagonal().max();
        let smoothness = Smoothness {
            block_lipschitz: curvature + coupling * lap_diag,
            full_lipschitz: curvature + coupling * lap_max,
            strong_convexity: None,
            restricted_growth: None,
            known_min: Some(0.0),
            convexity: Convexity::Nonconvex,
        };
        Ok(Self { n, cutoff, coupling, layout: BlockLayout::scalar(n), smoothness })
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        ring_neighbors(self.n, i)
    }

    fn q(&self, t: f64) -> f64 {
        let b = self.cutoff;
        if t.abs() <= b {
            0.25 * (t * t - 1.0).powi(2)
        } else {
            let s = b * t.signum();
            let d = t - s;
            0.25 * (s * s - 1.0).powi(2) + (s * s * s - s) * d + 0.5 * (3.0 * b * b - 1.0) * d * d
        }
    }

    fn dq(&self, t: f64) -> f64 {
        let b = self.cutoff;
        if t.abs() <= b {
            t * t * t - t
        } else {
            let s = b * t.signum();
            (s * s * s - s) + (3.0 * b * b - 1.0) * (t - s)
        }
    }
}

fn ring_neighbors(n: usize, i: usize) -> impl Iterator<Item = usize> {
    let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
    let count = match n {
        1 => 0,
        2 => 1,
        _ => 2,
    };
    [next, prev].into_iter().take(count)
}

fn ring_laplacian(n: usize) -> DMatrix<f64> {
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in ring_neighbors(n, i) {
            lap[(i, i)] += 1.0;
            lap[(i, j)] -= 1.0;
        }
    }
    lap
}

impl BlockObjective for CoupledQuartic {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn value(&self, x: &[f64]) -> f64 {
        let wells: f64 = x.iter().map(|&t| self.q(t)).sum();
        let mut coupling = 0.0;
        for i in 0..self.n {
            for j in self.neighbors(i) {
                coupling += (x[i] - x[j]).powi(2);
            }
        }
        // each edge was counted from both ends
        wells + 0.25 * self.coupling * coupling
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.block_gradient(x, i)[0]).collect()
    }

    fn block_gradient(&self, x: &[f64], block: usize) -> Vec<f64> {
        let pull: f64 = self.neighbors(block).map(|j| x[block] - x[j]).sum();
        vec![self.dq(x[block]) + self.coupling * pull]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{block_consistency, gradient_check};

    #[test]
    fn constants() {
        let f = CoupledQuartic::new(20, 2.0, 0.5).unwrap();
        assert!((f.smoothness().block_lipschitz - 12.0).abs() < 1e-12);
        assert!((f.smoothness().full_lipschitz - 13.0).abs() < 1e-9);
        assert_eq!(f.value(&[1.0; 20]), 0.0);
        assert_eq!(f.value(&[-1.0; 20]), 0.0);
        assert_eq!(f.gradient(&[0.0; 20]), vec![0.0; 20]);
    }

    #[test]
    fn extension_is_c1() {
        let f = CoupledQuartic::new(1, 2.0, 0.0).unwrap();
        for t in [2.0 - 1e-9, 2.0 + 1e-9, -2.0 - 1e-9, -2.0 + 1e-9] {
            assert!((f.q(t) - 2.25).abs() < 1e-7);
            assert!((f.dq(t).abs() - 6.0).abs() < 1e-7);
        }
    }

    #[test]
    fn gradients() {
        for n in [1, 2, 5] {
            let f = CoupledQuartic::new(n, 2.0, 0.5).unwrap();
            let x: Vec<f64> = (0..n).map(|i| 3.0 * ((i as f64) * 1.7).sin()).collect();
            assert!(gradient_check(&f, &x, 1e-6) < 1e-5);
            assert!(block_consistency(&f, &x) < 1e-12);
        }
    }

    #[test]
    fn two_nodes_share_one_edge() {
        let f = CoupledQuartic::new(2, 2.0, 1.0).unwrap();
        assert!((f.value(&[1.0, -1.0]) - 2.0).abs() < 1e-12);
    }
}
