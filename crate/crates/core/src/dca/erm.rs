use nalgebra::{DMatrix, DVector};

use crate::linalg::symmetric_eigenvalues;
use crate::objective::{BlockLayout, BlockObjective, Convexity, Loss, ObjectiveError, ResidualCache, Smoothness};

/// Dual of `min_w Σ_ξ p_ξ F_ξ(wᵀξ) + (λ/2)‖w‖²` over a finite sample space:
///
/// ```text
/// D_p(α) = (1/(2λ))‖Σ_ξ α_ξ ξ‖² + Σ_ξ p_ξ F*_ξ(−α_ξ/p_ξ)
/// ```
///
/// with primal point `v = (1/λ)Σ_ξ α_ξ ξ` as cache. All values use the
/// true masses `p`; estimated masses enter only through gradient errors.
#[derive(Debug, Clone)]
pub struct ErmDualProblem {
    samples: DMatrix<f64>,
    masses: Vec<f64>,
    lambda: f64,
    losses: Vec<Loss>,
    layout: BlockLayout,
    smoothness: Smoothness,
}

impl ErmDualProblem {
    /// `samples` holds one `ξ` per column.
    pub fn new(samples: DMatrix<f64>, masses: Vec<f64>, lambda: f64, losses: Vec<Loss>) -> Result<Self, ObjectiveError> {
        let n = samples.ncols();
        if !(lambda > 0.0) {
            return Err(ObjectiveError::InvalidParameter(format!("lambda {lambda} must be positive")));
        }
        if n == 0 || masses.len() != n || losses.len() != n {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "{n} samples, {} masses, {} losses",
                masses.len(),
                losses.len()
            )));
        }
        let total: f64 = masses.iter().sum();
        if masses.iter().any(|&p| !(p > 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(ObjectiveError::InvalidParameter("masses must be a positive probability vector".into()));
        }
        let mut hessian = samples.transpose() * &samples / lambda;
        let mut linear = DVector::zeros(n);
        let mut block_lipschitz = 0.0_f64;
        for i in 0..n {
            let Loss::Squared { target, .. } = losses[i];
            let lip = losses[i].conjugate_lipschitz();
            if !(lip > 0.0 && lip.is_finite()) {
                return Err(ObjectiveError::InvalidParameter("loss must be strongly convex".into()));
            }
            hessian[(i, i)] += lip / masses[i];
            linear[i] = target;
            block_lipschitz = block_lipschitz.max(samples.column(i).norm_squared() / lambda + lip / masses[i]);
        }
        let eig = symmetric_eigenvalues(&hessian);
        let (lo, hi) = (eig[0], *eig.last().unwrap());
        // D_p = ½αᵀHα − bᵀα for squared losses
        let sol = hessian.cholesky().ok_or(ObjectiveError::NotPsd(lo))?.solve(&linear);
        let smoothness = Smoothness {
            block_lipschitz,
            full_lipschitz: hi,
            strong_convexity: Some(lo),
            restricted_growth: Some(0.5 * lo),
            known_min: Some(-0.5 * linear.dot(&sol)),
            convexity: Convexity::Convex,
        };
        Ok(Self { samples, masses, lambda, losses, layout: BlockLayout::scalar(n), smoothness })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn losses(&self) -> &[Loss] {
        &self.losses
    }

    pub fn sample_count(&self) -> usize {
        self.masses.len()
    }

    /// Block Lipschitz constant when every mass is replaced by at least `floor`.
    pub fn lipschitz_with_floor(&self, floor: f64) -> f64 {
        (0..self.sample_count())
            .map(|i| self.samples.column(i).norm_squared() / self.lambda + self.losses[i].conjugate_lipschitz() / floor)
            .fold(0.0, f64::max)
    }

    /// `v = (1/λ)Σ_ξ α_ξ ξ`.
    pub fn primal_point(&self, alpha: &[f64]) -> Vec<f64> {
        (&self.samples * DVector::from_column_slice(alpha) / self.lambda).iter().copied().collect()
    }

    pub fn primal(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let fit: f64 = (0..self.sample_count())
            .map(|i| self.masses[i] * self.losses[i].value(self.samples.column(i).dot(&w)))
            .sum();
        fit + 0.5 * self.lambda * w.norm_squared()
    }

    fn dual_with_point(&self, alpha: &[f64], v: &[f64]) -> f64 {
        let quad = 0.5 * self.lambda * v.iter().map(|t| t * t).sum::<f64>();
        let conj: f64 = (0..self.sample_count())
            .map(|i| self.masses[i] * self.losses[i].conjugate(-alpha[i] / self.masses[i]))
            .sum();
        quad + conj
    }

    pub fn duality_gap(&self, alpha: &[f64]) -> f64 {
        let v = self.primal_point(alpha);
        self.primal(&v) + self.dual_with_point(alpha, &v)
    }

    /// `ξᵀv − ∇F*_ξ(−α_ξ/p)` for an arbitrary mass `p`.
    pub fn block_gradient_with_mass(&self, alpha: &[f64], v: &[f64], i: usize, mass: f64) -> f64 {
        let xv: f64 = self.samples.column(i).iter().zip(v).map(|(a, b)| a * b).sum();
        xv - self.losses[i].conjugate_grad(-alpha[i] / mass)
    }

    /// `∇F*(−α_ξ/p_ξ) − ∇F*(−α_ξ/p̄)`, the gradient error from using `p̄`.
    pub fn mass_error(&self, alpha: &[f64], i: usize, estimate: f64) -> f64 {
        let l = &self.losses[i];
        l.conjugate_grad(-alpha[i] / self.masses[i]) - l.conjugate_grad(-alpha[i] / estimate)
    }
}

impl BlockObjective for ErmDualProblem {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn value(&self, alpha: &[f64]) -> f64 {
        self.dual_with_point(alpha, &self.primal_point(alpha))
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let v = self.primal_point(alpha);
        (0..alpha.len()).map(|i| self.block_gradient_with_mass(alpha, &v, i, self.masses[i])).collect()
    }

    fn block_gradient(&self, alpha: &[f64], block: usize) -> Vec<f64> {
        vec![self.block_gradient_with_mass(alpha, &self.primal_point(alpha), block, self.masses[block])]
    }

    fn init_cache(&self, alpha: &[f64]) -> Option<ResidualCache> {
        Some(ResidualCache { name: "v", values: self.primal_point(alpha) })
    }

    fn block_gradient_cached(&self, alpha: &[f64], cache: Option<&ResidualCache>, block: usize) -> Vec<f64> {
        match cache {
            Some(c) => vec![self.block_gradient_with_mass(alpha, &c.values, block, self.masses[block])],
            None => self.block_gradient(alpha, block),
        }
    }

    fn update_cache(&self, cache: &mut ResidualCache, block: usize, delta: &[f64]) {
        let scale = delta[0] / self.lambda;
        for (v, x) in cache.values.iter_mut().zip(self.samples.column(block).iter()) {
            *v += x * scale;
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::objective::{block_consistency, gradient_check};

    pub(crate) fn small() -> ErmDualProblem {
        let samples = DMatrix::from_fn(3, 4, |i, j| ((2 * i + 3 * j) % 5) as f64 * 0.5 - 1.0);
        let masses = vec![0.1, 0.2, 0.3, 0.4];
        let losses = (0..4).map(|j| Loss::squared(j as f64 * 0.5 - 0.7)).collect();
        ErmDualProblem::new(samples, masses, 0.3, losses).unwrap()
    }

    #[test]
    fn gradients() {
        let p = small();
        let alpha = [0.2, -0.4, 0.9, 0.1];
        assert!(gradient_check(&p, &alpha, 1e-6) < 1e-5);
        assert!(block_consistency(&p, &alpha) < 1e-12);
    }

    #[test]
    fn gap_vanishes_at_dual_minimizer() {
        let p = small();
        let zero = vec![0.0; 4];
        assert!(p.duality_gap(&zero) > 0.0);
        // gradient descent on D_p to high accuracy
        let mut alpha = zero;
        let step = 1.0 / p.smoothness().full_lipschitz;
        for _ in 0..100_000 {
            let g = p.gradient(&alpha);
            for (a, gi) in alpha.iter_mut().zip(g) {
                *a -= step * gi;
            }
        }
        assert!(p.duality_gap(&alpha).abs() < 1e-10);
        assert!((p.value(&alpha) - p.smoothness().known_min.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mass_error_vanishes_for_exact_mass() {
        let p = small();
        let alpha = [0.2, -0.4, 0.9, 0.1];
        assert_eq!(p.mass_error(&alpha, 2, 0.3), 0.0);
        assert!(p.mass_error(&alpha, 2, 0.25) != 0.0);
        let v = p.primal_point(&alpha);
        let exact = p.block_gradient_with_mass(&alpha, &v, 2, 0.3);
        let est = p.block_gradient_with_mass(&alpha, &v, 2, 0.25);
        assert!((est - exact - p.mass_error(&alpha, 2, 0.25)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_masses() {
        let samples = DMatrix::from_element(1, 2, 1.0);
        let l = vec![Loss::squared(0.0); 2];
        assert!(ErmDualProblem::new(samples.clone(), vec![0.5, 0.6], 1.0, l.clone()).is_err());
        assert!(ErmDualProblem::new(samples, vec![1.0, 0.0], 1.0, l).is_err());
    }
}
