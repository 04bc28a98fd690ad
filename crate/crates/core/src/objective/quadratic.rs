use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{BlockLayout, BlockObjective, Convexity, ObjectiveError, Smoothness};
use crate::linalg::{is_symmetric, spectral_norm};

/// `f(x) = ½ xᵀQx + cᵀx` with `Q` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: DMatrix<f64>,
    c: DVector<f64>,
    layout: BlockLayout,
    smoothness: Smoothness,
    minimizer: Vec<f64>,
    min_positive_eigenvalue: f64,
}

/// Eigenvalues below this fraction of `‖Q‖₂` count as zero.
const RANK_TOL: f64 = 1e-12;

pub fn make_quadratic(
    q: DMatrix<f64>,
    c: Vec<f64>,
    layout: BlockLayout,
) -> Result<Quadratic, ObjectiveError> {
    let n = q.nrows();
    if !q.is_square() || c.len() != n || layout.dim() != n {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "Q is {}x{}, c has {}, blocks cover {}",
            q.nrows(),
            q.ncols(),
            c.len(),
            layout.dim()
        )));
    }
    let scale = q.amax().max(1.0);
    if !is_symmetric(&q, 1e-12 * scale) {
        return Err(ObjectiveError::Asymmetric);
    }
    let eig = SymmetricEigen::new(q.clone());
    let full = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lmin = eig.eigenvalues.min();
    if lmin < -RANK_TOL * full.max(1.0) {
        return Err(ObjectiveError::NotPsd(lmin));
    }
    let c = DVector::from_vec(c);
    // Pseudo-inverse solve in the eigenbasis; c must lie in range(Q).
    let coeffs = eig.eigenvectors.transpose() * &c;
    let mut z = DVector::zeros(n);
    let mut min_pos = f64::INFINITY;
    let mut min_value = 0.0;
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda > RANK_TOL * full {
            z[k] = -coeffs[k] / lambda;
            min_value -= 0.5 * coeffs[k] * coeffs[k] / lambda;
            min_pos = min_pos.min(lambda);
        } else if coeffs[k].abs() > 1e-9 * c.norm().max(1.0) {
            return Err(ObjectiveError::Unbounded);
        }
    }
    let minimizer = (&eig.eigenvectors * z).iter().copied().collect();
    let block_lipschitz = (0..layout.block_count())
        .map(|b| {
            let r = layout.range(b);
            spectral_norm(&q.view((r.start, r.start), (r.len(), r.len())).into_owned())
        })
        .fold(0.0_f64, f64::max);
    let strong = (lmin > RANK_TOL * full).then_some(lmin);
    let smoothness = Smoothness {
        block_lipschitz,
        full_lipschitz: full,
        strong_convexity: strong,
        restricted_growth: min_pos.is_finite().then_some(0.5 * min_pos),
        known_min: Some(min_value),
        convexity: Convexity::Convex,
    };
    Ok(Quadratic { q, c, layout, smoothness, minimizer, min_positive_eigenvalue: min_pos })
}

impl Quadratic {
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.c
    }

    /// Minimum-norm minimizer `−Q⁺c`.
    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    pub fn min_positive_eigenvalue(&self) -> f64 {
        self.min_positive_eigenvalue
    }

    /// Largest distance from a point of the level set `{f ≤ min f + gap}`
    /// to the minimizer set: `sqrt(2 gap / λ⁺_min)`.
    pub fn level_set_radius(&self, gap: f64) -> f64 {
        (2.0 * gap.max(0.0) / self.min_positive_eigenvalue).sqrt()
    }
}

impl BlockObjective for Quadratic {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut total = 0.0;
        for i in 0..n {
            let qi: f64 = (0..n).map(|j| self.q[(i, j)] * x[j]).sum();
            total += x[i] * (0.5 * qi + self.c[i]);
        }
        total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.q[(i, j)] * x[j]).sum::<f64>() + self.c[i])
            .collect()
    }

    fn block_gradient(&self, x: &[f64], block: usize) -> Vec<f64> {
        self.layout
            .range(block)
            .map(|i| (0..x.len()).map(|j| self.q[(i, j)] * x[j]).sum::<f64>() + self.c[i])
            .collect()
    }
}
