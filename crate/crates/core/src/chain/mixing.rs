use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{stationary_distribution, ChainError, StationaryDistribution, TransitionSchedule};
use crate::linalg::{frobenius_norm, spectral_norm, symmetric_eigenvalues};

/// `Φ(m, n) = P(m) P(m+1) ··· P(m+n)`.
pub fn phi_product(schedule: &TransitionSchedule, m: usize, n: usize) -> DMatrix<f64> {
    let mut prod = schedule.matrix_at(m).clone();
    for t in m + 1..=m + n {
        prod = prod * schedule.matrix_at(t);
    }
    prod
}

/// Default verification window `10 N²`.
pub fn default_horizon(n: usize) -> usize {
    10 * n * n
}

/// Worst-case distances `max_m ‖Φ(m, n) − Π*‖₂` and smallest entries
/// `min_m min_{i,j} [Φ(m, n)]_{i,j}` for `n = 0..=horizon`.
///
/// Offsets `m` are reduced to their equivalence classes under the
/// schedule's repetition rule, so the maximum over all `m ≥ 0` is exact.
/// Spectral norms are only evaluated where the Frobenius norm (an upper
/// bound) is at least `resolution`; below it the Frobenius value is stored,
/// which is enough to decide `< ε` for every `ε ≥ resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingCurve {
    pub stationary: StationaryDistribution,
    pub horizon: usize,
    pub resolution: f64,
    pub max_distance: Vec<f64>,
    pub min_entry: Vec<f64>,
}

impl MixingCurve {
    pub fn compute(
        schedule: &TransitionSchedule,
        stationary: StationaryDistribution,
        horizon: usize,
        resolution: f64,
    ) -> Self {
        let limit = stationary.limit_matrix();
        let mut max_distance = vec![0.0_f64; horizon + 1];
        let mut min_entry = vec![f64::INFINITY; horizon + 1];
        for m in 0..schedule.offset_classes() {
            let mut prod = schedule.matrix_at(m).clone();
            for n in 0..=horizon {
                if n > 0 {
                    prod = prod * schedule.matrix_at(m + n);
                }
                let diff = &prod - &limit;
                let frob = frobenius_norm(&diff);
                let dist = if frob < resolution { frob } else { spectral_norm(&diff) };
                max_distance[n] = max_distance[n].max(dist);
                min_entry[n] = min_entry[n].min(prod.min());
            }
        }
        Self { stationary, horizon, resolution, max_distance, min_entry }
    }

    /// Smallest `τ ≥ 1` with distance below `epsilon` for every `n ∈ [τ−1, horizon]`.
    pub fn tau(&self, epsilon: f64) -> Result<usize, ChainError> {
        assert!(
            epsilon >= self.resolution,
            "epsilon {epsilon} below curve resolution {}",
            self.resolution
        );
        let not_mixing = ChainError::DoesNotMix { epsilon, horizon: self.horizon };
        if self.max_distance[self.horizon] >= epsilon {
            return Err(not_mixing);
        }
        let mut start = self.horizon;
        while start > 0 && self.max_distance[start - 1] < epsilon {
            start -= 1;
        }
        Ok(start + 1)
    }
}

/// Result of a mixing-time search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub epsilon: f64,
    pub tau: usize,
    pub horizon: usize,
    /// The `π*_min / 2`-mixing time, when the chain gets there within the horizon.
    pub internal_tau: Option<usize>,
    pub pi_min: f64,
}

/// Smallest `τ_ε` such that `‖Φ(m,n) − Π*‖₂ < ε` for all `m` and all
/// `n ∈ [τ_ε − 1, horizon]`.
pub fn mixing_time(
    schedule: &TransitionSchedule,
    epsilon: f64,
    horizon: usize,
) -> Result<MixingProfile, ChainError> {
    if !(epsilon > 0.0) {
        return Err(ChainError::InvalidEpsilon(epsilon));
    }
    let stationary = stationary_distribution(schedule)?;
    let pi_min = stationary.pi_min;
    let curve = MixingCurve::compute(schedule, stationary, horizon, epsilon.min(pi_min / 2.0));
    let tau = curve.tau(epsilon)?;
    Ok(MixingProfile {
        epsilon,
        tau,
        horizon,
        internal_tau: curve.tau(pi_min / 2.0).ok(),
        pi_min,
    })
}

/// The `π*_min/2`-mixing time together with the entry bound it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalTau {
    pub tau: usize,
    pub pi_min: f64,
    /// Smallest entry of `Φ(m, n)` over all `m` and `n ∈ [τ−1, horizon]`.
    pub min_entry: f64,
    pub horizon: usize,
}

/// `τ` for `ε = π*_min / 2`, verified against `[Φ(m,n)]_{i,j} ≥ π*_min/2`
/// for every checked `n ≥ τ − 1`.
pub fn internal_tau(schedule: &TransitionSchedule, horizon: usize) -> Result<InternalTau, ChainError> {
    let stationary = stationary_distribution(schedule)?;
    let pi_min = stationary.pi_min;
    let bound = pi_min / 2.0;
    let curve = MixingCurve::compute(schedule, stationary, horizon, bound);
    let tau = curve.tau(bound)?;
    let mut min_entry = f64::INFINITY;
    for n in tau - 1..=horizon {
        let value = curve.min_entry[n];
        if value < bound {
            return Err(ChainError::EntryBoundViolated { value, bound, n });
        }
        min_entry = min_entry.min(value);
    }
    Ok(InternalTau { tau, pi_min, min_entry, horizon })
}

/// Modulus of the eigenvalue of `P` with second-largest modulus.
///
/// Reversible chains are symmetrized as `D^{1/2} P D^{-1/2}` (with `D =
/// diag(π*)`) so the spectrum comes from a symmetric eigensolver; other
/// chains use the general complex spectrum.
pub fn second_eigenvalue_modulus(p: &DMatrix<f64>) -> Result<f64, ChainError> {
    let n = p.nrows();
    if n == 1 {
        return Ok(0.0);
    }
    let schedule = TransitionSchedule::from_matrix(p.clone())?;
    let pi = stationary_distribution(&schedule)?.pi;
    let reversible =
        (0..n).all(|i| (0..n).all(|j| (pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs() <= 1e-12));
    let mut moduli: Vec<f64> = if reversible {
        let s = DMatrix::from_fn(n, n, |i, j| pi[i].sqrt() * p[(i, j)] / pi[j].sqrt());
        let s = (&s + s.transpose()) * 0.5;
        symmetric_eigenvalues(&s).into_iter().map(f64::abs).collect()
    } else {
        p.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect()
    };
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli[1])
}

/// `(1 + 3 ln N / (2 ln(1/λ₂))) · log_{1/λ₂}(1/ε)`, floored at 1 since a
/// mixing time is at least 1. Returns 1 when `λ₂ = 0`.
pub fn spectral_mixing_bound(p: &DMatrix<f64>, epsilon: f64) -> Result<f64, ChainError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ChainError::InvalidEpsilon(epsilon));
    }
    let lambda = second_eigenvalue_modulus(p)?;
    if lambda >= 1.0 - 1e-12 {
        return Err(ChainError::NonMixingSpectrum(lambda));
    }
    if lambda < 1e-12 {
        return Ok(1.0);
    }
    let n = p.nrows() as f64;
    let log_inv = (1.0 / lambda).ln();
    let value = (1.0 + 3.0 * n.ln() / (2.0 * log_inv)) * ((1.0 / epsilon).ln() / log_inv);
    Ok(value.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_random_walk, Graph, Repetition, WalkPolicy};

    fn sym2(q: f64) -> TransitionSchedule {
        TransitionSchedule::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0 - q, q, q, 1.0 - q])).unwrap()
    }

    #[test]
    fn phi_examples() {
        let s = sym2(0.1);
        let p = s.matrix_at(0).clone();
        assert_eq!(phi_product(&s, 0, 0), p);
        let p3 = &p * &p * &p;
        assert!((phi_product(&s, 5, 2) - p3).abs().max() < 1e-15);

        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let tv = TransitionSchedule::from_matrices(vec![a.clone(), b.clone()], Repetition::Cycle).unwrap();
        assert!((phi_product(&tv, 0, 2) - &a * &b * &a).abs().max() < 1e-15);
    }

    #[test]
    fn rows_of_products_stay_stochastic() {
        let g = Graph::ring(7, true).unwrap();
        let s = build_random_walk(&g, &WalkPolicy::Simple).unwrap();
        let phi = phi_product(&s, 3, 40);
        for i in 0..7 {
            assert!((phi.row(i).sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_rows_mix_immediately() {
        let s = build_random_walk(&Graph::complete(5, true).unwrap(), &WalkPolicy::Simple).unwrap();
        let prof = mixing_time(&s, 0.01, default_horizon(5)).unwrap();
        assert_eq!(prof.tau, 1);
        assert_eq!(prof.internal_tau, Some(1));
    }

    #[test]
    fn periodic_chain_does_not_mix() {
        let s = build_random_walk(&Graph::path(2, false).unwrap(), &WalkPolicy::Simple).unwrap();
        assert!(matches!(mixing_time(&s, 0.4, 40), Err(ChainError::DoesNotMix { .. })));
    }

    #[test]
    fn two_state_tau_matches_brute_force() {
        // ‖P^t − Π‖₂ = 0.8^t here; cross-check with explicit powers.
        let s = sym2(0.1);
        let prof = mixing_time(&s, 0.1, 40).unwrap();
        let p = s.matrix_at(0).clone();
        let limit = DMatrix::from_element(2, 2, 0.5);
        let mut pt = DMatrix::identity(2, 2);
        let mut dists = Vec::new();
        for _ in 0..=40 {
            pt = &pt * &p;
            dists.push(spectral_norm(&(&pt - &limit)));
        }
        let brute = (1..=41).find(|&t| dists[t - 1..].iter().all(|&d| d < 0.1)).unwrap();
        assert_eq!(prof.tau, brute);
        assert_eq!(prof.tau, 11);
    }

    #[test]
    fn internal_tau_entry_bound() {
        let s = sym2(0.1);
        let it = internal_tau(&s, 40).unwrap();
        let prof = mixing_time(&s, 0.25, 40).unwrap();
        assert_eq!(it.tau, prof.tau);
        assert!(it.min_entry >= it.pi_min / 2.0);

        let ring = build_random_walk(&Graph::ring(6, true).unwrap(), &WalkPolicy::Simple).unwrap();
        let it = internal_tau(&ring, default_horizon(6)).unwrap();
        let phi = phi_product(&ring, 0, it.tau - 1);
        assert!(phi.min() >= it.pi_min / 2.0);
    }

    #[test]
    fn spectral_bound_examples() {
        let p = sym2(0.1).matrix_at(0).clone();
        let lambda: f64 = 0.8;
        let expect = (1.0 + 3.0 * 2f64.ln() / (2.0 * (1.0 / lambda).ln())) * (10f64.ln() / (1.0 / lambda).ln());
        let got = spectral_mixing_bound(&p, 0.1).unwrap();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        assert!(got >= 11.0);

        let uniform = DMatrix::from_element(3, 3, 1.0 / 3.0);
        assert_eq!(spectral_mixing_bound(&uniform, 0.1).unwrap(), 1.0);

        let periodic = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(spectral_mixing_bound(&periodic, 0.1), Err(ChainError::NonMixingSpectrum(_))));
    }

    #[test]
    fn spectral_bound_monotone_in_epsilon() {
        let p = sym2(0.2).matrix_at(0).clone();
        let mut last = 0.0;
        for eps in [0.5, 0.1, 0.05, 0.01, 0.001] {
            let b = spectral_mixing_bound(&p, eps).unwrap();
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn nonreversible_second_eigenvalue() {
        // directed 3-cycle with holding: eigenvalues 1 and 0.5 + 0.5 e^{±2πi/3}
        let p = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5]);
        let got = second_eigenvalue_modulus(&p).unwrap();
        let z = nalgebra::Complex::new(0.5 + 0.5 * (2.0 * std::f64::consts::PI / 3.0).cos(),
            0.5 * (2.0 * std::f64::consts::PI / 3.0).sin());
        assert!((got - z.norm()).abs() < 1e-10);
    }
}
