use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// `C₁(τ)`, `C₂(τ)` of the nonconvex rates and `C_τ` of the convex rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub c1: f64,
    pub c2: f64,
    pub c_tau: f64,
    pub gamma: f64,
    pub l: f64,
    pub l_r: f64,
    pub tau: usize,
    pub pi_min: f64,
}

/// ```text
/// C₁ = 4γ/(2 − Lγ) · (2L_r²(τ−1)² + 4/γ²)
/// C₂ = 4γ²/(2 − Lγ)² · (2L_r²(τ−1)² + 4/γ²)
/// C_τ = max{4L_r²(τ−1), 4/γ²} / ((1/γ − L/2)·π_min)
/// ```
pub fn rate_constants(gamma: f64, l: f64, l_r: f64, tau: usize, pi_min: f64) -> Result<RateConstants, AnalysisError> {
    if !(l > 0.0) || !(l_r > 0.0) {
        return Err(AnalysisError::Invalid(format!("Lipschitz constants L = {l}, L_r = {l_r} must be positive")));
    }
    if !(gamma > 0.0 && gamma < 2.0 / l) {
        return Err(AnalysisError::StepSize { gamma, limit: 2.0 / l });
    }
    if tau == 0 {
        return Err(AnalysisError::Invalid("tau must be at least 1".into()));
    }
    if !(pi_min > 0.0 && pi_min <= 1.0) {
        return Err(AnalysisError::Invalid(format!("pi_min {pi_min} must lie in (0, 1]")));
    }
    let t = (tau - 1) as f64;
    let factor = 2.0 * l_r * l_r * t * t + 4.0 / (gamma * gamma);
    let denom = 2.0 - l * gamma;
    Ok(RateConstants {
        c1: 4.0 * gamma / denom * factor,
        c2: 4.0 * gamma * gamma / (denom * denom) * factor,
        c_tau: (4.0 * l_r * l_r * t).max(4.0 / (gamma * gamma)) / ((1.0 / gamma - l / 2.0) * pi_min),
        gamma,
        l,
        l_r,
        tau,
        pi_min,
    })
}

impl RateConstants {
    /// `2/((k+1)π_min) · [C₁·F₀ + (C₂ + 4)𝓔]`.
    pub fn nonconvex_square_summable(&self, f_gap: f64, energy: f64, k: usize) -> f64 {
        2.0 / ((k as f64 + 1.0) * self.pi_min) * (self.c1 * f_gap + (self.c2 + 4.0) * energy)
    }

    /// `2/((k+1)π_min) · C₁·F₀ + (2/π_min)(C₂(k+τ)/(k+1) + 4)·S`.
    pub fn nonconvex_bounded(&self, f_gap: f64, level: f64, k: usize) -> f64 {
        let kf = k as f64;
        2.0 / ((kf + 1.0) * self.pi_min) * self.c1 * f_gap
            + 2.0 / self.pi_min * (self.c2 * (kf + self.tau as f64) / (kf + 1.0) + 4.0) * level
    }

    /// Limit of the bounded-noise bound, `2(C₂ + 4)S/π_min`.
    pub fn bounded_plateau(&self, level: f64) -> f64 {
        2.0 * (self.c2 + 4.0) * level / self.pi_min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_mixing_time_hand_values() {
        for l in [0.5, 1.0, 3.0] {
            for pi_min in [0.05, 0.25] {
                let c = rate_constants(1.0 / l, l, 2.0 * l, 1, pi_min).unwrap();
                assert!((c.c1 - 16.0 * l).abs() < 1e-12 * l);
                assert!((c.c2 - 16.0).abs() < 1e-12);
                assert!((c.c_tau - 8.0 * l / pi_min).abs() < 1e-9 * c.c_tau);
            }
        }
    }

    #[test]
    fn unit_mixing_time_ignores_full_lipschitz() {
        let a = rate_constants(0.3, 2.0, 2.0, 1, 0.1).unwrap();
        let b = rate_constants(0.3, 2.0, 50.0, 1, 0.1).unwrap();
        assert_eq!((a.c1, a.c2, a.c_tau), (b.c1, b.c2, b.c_tau));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(rate_constants(1.0, 2.0, 2.0, 1, 0.5), Err(AnalysisError::StepSize { .. })));
        assert!(rate_constants(0.1, 2.0, 2.0, 0, 0.5).is_err());
        assert!(rate_constants(0.1, 2.0, 2.0, 1, 0.0).is_err());
    }

    #[test]
    fn noise_free_envelope_drops_energy_term() {
        let c = rate_constants(0.5, 1.0, 1.5, 3, 0.2).unwrap();
        let k = 40;
        assert_eq!(c.nonconvex_square_summable(2.0, 0.0, k), 2.0 * c.c1 * 2.0 / ((k as f64 + 1.0) * 0.2));
        let far = c.nonconvex_bounded(2.0, 1e-4, 1 << 40);
        assert!((far - c.bounded_plateau(1e-4)).abs() < 1e-6 * far);
    }

    proptest! {
        #[test]
        fn positive_and_monotone_in_pi_min(
            l in 0.1..10.0f64, kappa in 1.0..5.0f64, frac in 0.05..0.95f64,
            tau in 1usize..50, p1 in 0.01..0.5f64, dp in 0.01..0.5f64,
        ) {
            let gamma = frac * 2.0 / l;
            let a = rate_constants(gamma, l, kappa * l, tau, p1).unwrap();
            let b = rate_constants(gamma, l, kappa * l, tau, p1 + dp).unwrap();
            prop_assert!(a.c1 > 0.0 && a.c2 > 0.0 && a.c_tau > 0.0);
            prop_assert!(b.c_tau < a.c_tau);
        }

        #[test]
        fn scale_consistency(l in 0.1..10.0f64, kappa in 1.0..5.0f64, frac in 0.05..0.95f64, tau in 1usize..50) {
            // (L, L_r, γ) → (2L, 2L_r, γ/2) keeps γL and γL_r, so C₁ and C_τ
            // double while C₂ is unchanged
            let gamma = frac * 2.0 / l;
            let a = rate_constants(gamma, l, kappa * l, tau, 0.1).unwrap();
            let b = rate_constants(gamma / 2.0, 2.0 * l, 2.0 * kappa * l, tau, 0.1).unwrap();
            prop_assert!((b.c1 / a.c1 - 2.0).abs() < 1e-9);
            prop_assert!((b.c2 / a.c2 - 1.0).abs() < 1e-9);
            prop_assert!((b.c_tau / a.c_tau - 2.0).abs() < 1e-9);
        }
    }
}
