use nalgebra::{DMatrix, DVector};

use super::{BlockLayout, BlockObjective, Convexity, ObjectiveError, ResidualCache, Smoothness};
use crate::linalg::{spectral_norm, symmetric_eigenvalues};

/// `f(x) = ½‖Mx − y‖²` with the residual `r = Mx − y` as cache.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    m: DMatrix<f64>,
    y: DVector<f64>,
    layout: BlockLayout,
    smoothness: Smoothness,
}

impl LeastSquares {
    pub fn new(m: DMatrix<f64>, y: Vec<f64>, layout: BlockLayout) -> Result<Self, ObjectiveError> {
        if m.nrows() != y.len() || m.ncols() != layout.dim() {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "M is {}x{}, y has {}, blocks cover {}",
                m.nrows(),
                m.ncols(),
                y.len(),
                layout.dim()
            )));
        }
        let y = DVector::from_vec(y);
        let block_lipschitz = (0..layout.block_count())
            .map(|b| {
                let r = layout.range(b);
                spectral_norm(&m.columns(r.start, r.len()).into_owned()).powi(2)
            })
            .fold(0.0_f64, f64::max);
        let gram = m.transpose() * &m;
        let eig = symmetric_eigenvalues(&gram);
        let top = eig.last().copied().unwrap_or(0.0);
        let positive = eig.iter().copied().filter(|&v| v > 1e-12 * top.max(1.0));
        let min_pos = positive.clone().fold(f64::INFINITY, f64::min);
        let full_rank = positive.count() == layout.dim();
        // min ½‖Mx − y‖² is half the squared distance from y to range(M)
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let tol = 1e-12 * svd.singular_values.max().max(1.0);
        let mut projected = DVector::zeros(y.len());
        for (k, s) in svd.singular_values.iter().enumerate() {
            if *s > tol {
                let col = u.column(k);
                projected += col * col.dot(&y);
            }
        }
        let known_min = 0.5 * (&y - projected).norm_squared();
        let smoothness = Smoothness {
            block_lipschitz,
            full_lipschitz: top,
            strong_convexity: full_rank.then_some(min_pos),
            restricted_growth: min_pos.is_finite().then_some(0.5 * min_pos),
            known_min: Some(known_min),
            convexity: Convexity::Convex,
        };
        Ok(Self { m, y, layout, smoothness })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.y
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        &self.m * DVector::from_column_slice(x) - &self.y
    }
}

impl BlockObjective for LeastSquares {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.residual(x).norm_squared()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.m.transpose() * self.residual(x)).iter().copied().collect()
    }

    fn init_cache(&self, x: &[f64]) -> Option<ResidualCache> {
        Some(ResidualCache { name: "Mx-y", values: self.residual(x).iter().copied().collect() })
    }

    fn block_gradient_cached(&self, x: &[f64], cache: Option<&ResidualCache>, block: usize) -> Vec<f64> {
        let Some(cache) = cache else {
            return self.block_gradient(x, block);
        };
        self.layout
            .range(block)
            .map(|j| self.m.column(j).iter().zip(&cache.values).map(|(a, r)| a * r).sum())
            .collect()
    }

    fn update_cache(&self, cache: &mut ResidualCache, block: usize, delta: &[f64]) {
        for (j, d) in self.layout.range(block).zip(delta) {
            for (r, a) in cache.values.iter_mut().zip(self.m.column(j).iter()) {
                *r += a * d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{block_consistency, gradient_check};

    fn instance() -> LeastSquares {
        let m = DMatrix::from_fn(6, 4, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
        LeastSquares::new(m, vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0], BlockLayout::from_dims(&[1, 3]).unwrap()).unwrap()
    }

    #[test]
    fn gradient_and_cache() {
        let f = instance();
        let x = [0.3, -1.0, 2.0, 0.1];
        assert!(gradient_check(&f, &x, 1e-6) < 1e-5);
        assert!(block_consistency(&f, &x) < 1e-10);
        let mut cache = f.init_cache(&x).unwrap();
        f.update_cache(&mut cache, 1, &[0.5, 0.0, -1.0]);
        let moved = [0.3, -0.5, 2.0, -0.9];
        let fresh = f.init_cache(&moved).unwrap();
        for (a, b) in cache.values.iter().zip(&fresh.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn minimum_matches_normal_equations() {
        let f = instance();
        let m = f.matrix();
        let x = (m.transpose() * m).lu().solve(&(m.transpose() * f.target())).unwrap();
        let xs: Vec<f64> = x.iter().copied().collect();
        assert!((f.value(&xs) - f.smoothness().known_min.unwrap()).abs() < 1e-9);
    }
}
