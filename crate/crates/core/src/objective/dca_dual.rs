use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BlockLayout, BlockObjective, Convexity, ObjectiveError, ResidualCache, Smoothness};
use crate::linalg::symmetric_eigenvalues;

/// Strongly convex scalar loss with a differentiable conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Loss {
    /// `ℓ(u) = (c/2)(u − b)²`, so `ℓ*(v) = v²/(2c) + bv`.
    Squared { target: f64, curvature: f64 },
}

impl Loss {
    pub fn squared(target: f64) -> Self {
        Loss::Squared { target, curvature: 1.0 }
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Loss::Squared { target, curvature } => 0.5 * curvature * (u - target).powi(2),
        }
    }

    pub fn conjugate(&self, v: f64) -> f64 {
        match *self {
            Loss::Squared { target, curvature } => 0.5 * v * v / curvature + target * v,
        }
    }

    pub fn conjugate_grad(&self, v: f64) -> f64 {
        match *self {
            Loss::Squared { target, curvature } => v / curvature + target,
        }
    }

    /// Lipschitz constant of `∇ℓ*`.
    pub fn conjugate_lipschitz(&self) -> f64 {
        match *self {
            Loss::Squared { curvature, .. } => 1.0 / curvature,
        }
    }

    /// Second derivative of `ℓ*`, constant for the squared family.
    fn conjugate_curvature(&self) -> f64 {
        self.conjugate_lipschitz()
    }

    fn validate(&self) -> Result<(), ObjectiveError> {
        match *self {
            Loss::Squared { curvature, target } if curvature > 0.0 && target.is_finite() => Ok(()),
            Loss::Squared { curvature, .. } => Err(ObjectiveError::InvalidParameter(format!(
                "loss curvature {curvature} must be positive"
            ))),
        }
    }
}

/// `D(α) = (λ/2)‖Aα‖² + (1/N)Σ_i ℓ*_i(−α_i)` with columns `A_i = a_i/(λN)`.
///
/// Its minimizer maps to the minimizer of
/// `P(w) = (λ/2)‖w‖² + (1/N)Σ_i ℓ_i(wᵀa_i)` through `w = Aα`.
#[derive(Debug, Clone)]
pub struct DcaDualObjective {
    samples: DMatrix<f64>,
    columns: DMatrix<f64>,
    lambda: f64,
    losses: Vec<Loss>,
    layout: BlockLayout,
    smoothness: Smoothness,
}

/// `a_vectors` holds the samples `a_i` as columns of a `d × N` matrix.
pub fn make_dca_dual(
    a_vectors: DMatrix<f64>,
    lambda: f64,
    losses: Vec<Loss>,
) -> Result<DcaDualObjective, ObjectiveError> {
    if !(lambda > 0.0) {
        return Err(ObjectiveError::InvalidParameter(format!("lambda {lambda} must be positive")));
    }
    let n = a_vectors.ncols();
    if n == 0 || losses.len() != n {
        return Err(ObjectiveError::DimensionMismatch(format!("{n} samples, {} losses", losses.len())));
    }
    for l in &losses {
        l.validate()?;
    }
    let columns = &a_vectors / (lambda * n as f64);
    let nf = n as f64;
    let block_lipschitz = (0..n)
        .map(|i| lambda * columns.column(i).norm_squared() + losses[i].conjugate_lipschitz() / nf)
        .fold(0.0, f64::max);
    let hessian = dual_hessian(&columns, lambda, &losses);
    let eig = symmetric_eigenvalues(&hessian);
    let (lo, hi) = (eig[0], *eig.last().unwrap());
    // D is a strictly convex quadratic: min = −½ gᵀH⁻¹g with g = (1/N)b
    let g = DVector::from_iterator(
        n,
        losses.iter().map(|l| match *l {
            Loss::Squared { target, .. } => target / nf,
        }),
    );
    let sol = hessian.cholesky().ok_or(ObjectiveError::NotPsd(lo))?.solve(&g);
    let smoothness = Smoothness {
        block_lipschitz,
        full_lipschitz: hi,
        strong_convexity: Some(lo),
        restricted_growth: Some(0.5 * lo),
        known_min: Some(-0.5 * g.dot(&sol)),
        convexity: Convexity::Convex,
    };
    Ok(DcaDualObjective {
        samples: a_vectors,
        columns,
        lambda,
        losses,
        layout: BlockLayout::scalar(n),
        smoothness,
    })
}

fn dual_hessian(columns: &DMatrix<f64>, lambda: f64, losses: &[Loss]) -> DMatrix<f64> {
    let n = losses.len() as f64;
    let mut h = columns.transpose() * columns * lambda;
    for (i, l) in losses.iter().enumerate() {
        h[(i, i)] += l.conjugate_curvature() / n;
    }
    h
}

impl DcaDualObjective {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sample_count(&self) -> usize {
        self.losses.len()
    }

    pub fn dimension(&self) -> usize {
        self.columns.nrows()
    }

    pub fn losses(&self) -> &[Loss] {
        &self.losses
    }

    /// The scaled columns `A_i`.
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// `Aα`.
    pub fn map(&self, alpha: &[f64]) -> Vec<f64> {
        (&self.columns * DVector::from_column_slice(alpha)).iter().copied().collect()
    }

    pub fn primal(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let n = self.losses.len() as f64;
        let fit: f64 = self
            .losses
            .iter()
            .enumerate()
            .map(|(i, l)| l.value(self.samples.column(i).dot(&w)))
            .sum();
        0.5 * self.lambda * w.norm_squared() + fit / n
    }

    /// `D(α)` given the cached `w = Aα`.
    pub fn dual_with_map(&self, alpha: &[f64], w: &[f64]) -> f64 {
        let n = self.losses.len() as f64;
        let conj: f64 = self.losses.iter().zip(alpha).map(|(l, &a)| l.conjugate(-a)).sum();
        0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>() + conj / n
    }

    /// `P(Aα) + D(α)`.
    pub fn duality_gap(&self, alpha: &[f64]) -> f64 {
        let w = self.map(alpha);
        self.primal(&w) + self.dual_with_map(alpha, &w)
    }

    fn block_gradient_from_map(&self, alpha: &[f64], w: &[f64], i: usize) -> f64 {
        let n = self.losses.len() as f64;
        let aw: f64 = self.columns.column(i).iter().zip(w).map(|(a, v)| a * v).sum();
        self.lambda * aw - self.losses[i].conjugate_grad(-alpha[i]) / n
    }
}

impl BlockObjective for DcaDualObjective {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn value(&self, alpha: &[f64]) -> f64 {
        self.dual_with_map(alpha, &self.map(alpha))
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let w = self.map(alpha);
        (0..alpha.len()).map(|i| self.block_gradient_from_map(alpha, &w, i)).collect()
    }

    fn block_gradient(&self, alpha: &[f64], block: usize) -> Vec<f64> {
        vec![self.block_gradient_from_map(alpha, &self.map(alpha), block)]
    }

    fn init_cache(&self, alpha: &[f64]) -> Option<ResidualCache> {
        Some(ResidualCache { name: "A_alpha", values: self.map(alpha) })
    }

    fn block_gradient_cached(&self, alpha: &[f64], cache: Option<&ResidualCache>, block: usize) -> Vec<f64> {
        match cache {
            Some(c) => vec![self.block_gradient_from_map(alpha, &c.values, block)],
            None => self.block_gradient(alpha, block),
        }
    }

    fn update_cache(&self, cache: &mut ResidualCache, block: usize, delta: &[f64]) {
        for (w, a) in cache.values.iter_mut().zip(self.columns.column(block).iter()) {
            *w += a * delta[0];
        }
    }
}
