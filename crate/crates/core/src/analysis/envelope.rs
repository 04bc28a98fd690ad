use serde::{Deserialize, Serialize};

use super::{running_min_grad_sq, AnalysisError, RateConstants, SeedAverage};
use crate::solver::Trace;

/// Minimum number of seeds for a nonconvex envelope check.
pub const MIN_SEEDS: usize = 30;

/// Fraction of grid points allowed above the bound, each by at most the band.
pub const VIOLATION_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    NonconvexSqSummable,
    NonconvexBounded,
    Sublinear,
    Linear,
}

/// Noise budget entering the nonconvex bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseBudget {
    /// `𝓔 = Σ‖ε^k‖²` (zero when noise-free).
    SquareSummable { energy: f64 },
    /// `S = sup‖ε^k‖²`.
    Bounded { level: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub kind: EnvelopeKind,
    pub k_grid: Vec<usize>,
    pub bound_curve: Vec<f64>,
    pub empirical_curve: Vec<f64>,
    pub band: Vec<f64>,
    /// Grid points where the mean exceeds the bound.
    pub violations: usize,
    /// Grid points where the mean exceeds the bound by more than the band.
    pub band_violations: usize,
    /// `min_k (bound − mean)`.
    pub slack_min: f64,
    pub seeds: usize,
    pub warnings: Vec<String>,
}

impl EnvelopeReport {
    /// At most 1% of grid points above the bound, none beyond the band.
    pub fn passed(&self) -> bool {
        self.band_violations == 0 && (self.violations as f64) <= VIOLATION_FRACTION * self.k_grid.len() as f64
    }

    pub fn summary(&self) -> String {
        format!(
            "{:?}: {} grid points, {} above bound, {} beyond band, min slack {:.3e} -> {}",
            self.kind,
            self.k_grid.len(),
            self.violations,
            self.band_violations,
            self.slack_min,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// `F₀C_τR² / (F₀⌊k/τ⌋ + C_τR²)`.
pub fn envelope_sublinear(f0: f64, c_tau: f64, r: f64, tau: usize, k_grid: &[usize]) -> Vec<f64> {
    let cr = c_tau * r * r;
    k_grid
        .iter()
        .map(|&k| f0 * cr / (f0 * (k / tau) as f64 + cr))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEnvelope {
    pub bound: Vec<f64>,
    pub contraction: f64,
    pub warning: Option<String>,
}

/// `F₀(1 − ν/C_τ)^⌊k/τ⌋`, with the contraction factor clamped at zero.
pub fn envelope_linear(f0: f64, c_tau: f64, nu: f64, tau: usize, k_grid: &[usize]) -> LinearEnvelope {
    let raw = 1.0 - nu / c_tau;
    let (contraction, warning) = if raw <= 0.0 {
        (0.0, Some(format!("nu = {nu} >= C_tau = {c_tau}: contraction factor clamped at 0")))
    } else {
        (raw, None)
    };
    let bound = k_grid
        .iter()
        .map(|&k| {
            let t = k / tau;
            if t == 0 {
                f0
            } else {
                f0 * contraction.powf(t as f64)
            }
        })
        .collect();
    LinearEnvelope { bound, contraction, warning }
}

/// Compares a seed-averaged curve against a bound on the same grid.
pub fn compare_envelope(kind: EnvelopeKind, average: &SeedAverage, bound: &[f64]) -> Result<EnvelopeReport, AnalysisError> {
    if bound.len() != average.k.len() {
        return Err(AnalysisError::Mismatch);
    }
    let mut violations = 0;
    let mut band_violations = 0;
    let mut slack_min = f64::INFINITY;
    for ((&m, &b), &w) in average.mean.iter().zip(bound).zip(&average.band) {
        // rounding-level excess is not a violation
        let tol = 1e-12 * b.abs();
        slack_min = slack_min.min(b - m);
        if m > b + tol {
            violations += 1;
            if m - w > b + tol {
                band_violations += 1;
            }
        }
    }
    Ok(EnvelopeReport {
        kind,
        k_grid: average.k.clone(),
        bound_curve: bound.to_vec(),
        empirical_curve: average.mean.clone(),
        band: average.band.clone(),
        violations,
        band_violations,
        slack_min,
        seeds: average.seeds,
        warnings: Vec::new(),
    })
}

/// Right-hand side of the nonconvex rate at each `k` of `k_grid`.
pub fn nonconvex_bound(
    constants: &RateConstants,
    f_gap: f64,
    noise: NoiseBudget,
    k_grid: &[usize],
) -> (EnvelopeKind, Vec<f64>) {
    match noise {
        NoiseBudget::SquareSummable { energy } => (
            EnvelopeKind::NonconvexSqSummable,
            k_grid.iter().map(|&k| constants.nonconvex_square_summable(f_gap, energy, k)).collect(),
        ),
        NoiseBudget::Bounded { level } => (
            EnvelopeKind::NonconvexBounded,
            k_grid.iter().map(|&k| constants.nonconvex_bounded(f_gap, level, k)).collect(),
        ),
    }
}

/// Seed-averaged `min_{1≤t≤k}‖∇f(x^t)‖²` against the nonconvex bound for
/// the given noise budget. `f_gap = f(x⁰) − min f`.
pub fn envelope_nonconvex(
    traces: &[Trace],
    constants: &RateConstants,
    f_gap: f64,
    noise: NoiseBudget,
) -> Result<EnvelopeReport, AnalysisError> {
    if traces.len() < MIN_SEEDS {
        return Err(AnalysisError::Invalid(format!("{} seeds, need at least {MIN_SEEDS}", traces.len())));
    }
    let curves: Vec<_> = traces.iter().map(running_min_grad_sq).collect();
    let average = SeedAverage::from_curves(&curves)?;
    let (kind, bound) = nonconvex_bound(constants, f_gap, noise, &average.k);
    compare_envelope(kind, &average, &bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::rate_constants;
    use crate::solver::{StopReason, TraceRecord};
    use std::collections::BTreeMap;

    #[test]
    fn sublinear_hand_values() {
        let b = envelope_sublinear(2.0, 3.0, 1.0, 5, &[0, 4, 5, 10, 1_000_000]);
        assert_eq!(b[0], 2.0);
        assert_eq!(b[1], 2.0);
        assert!((b[2] - 6.0 / 5.0).abs() < 1e-15);
        assert!((b[3] - 6.0 / 7.0).abs() < 1e-15);
        // ~ C_τR²τ/k for large k
        assert!((b[4] * 1e6 / (3.0 * 5.0) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn linear_hand_values() {
        let e = envelope_linear(8.0, 2.0, 1.0, 1, &[0, 3]);
        assert_eq!(e.bound, vec![8.0, 1.0]);
        assert!(e.warning.is_none());
        let e = envelope_linear(8.0, 2.0, 1.0, 4, &[3, 4]);
        assert_eq!(e.bound, vec![8.0, 4.0]);
    }

    #[test]
    fn linear_clamps() {
        let e = envelope_linear(8.0, 1.0, 2.0, 1, &[0, 1, 2]);
        assert_eq!(e.bound, vec![8.0, 0.0, 0.0]);
        assert!(e.warning.is_some());
    }

    #[test]
    fn violations_and_band() {
        let avg = SeedAverage {
            k: (0..200).collect(),
            mean: vec![1.0; 200],
            sd: vec![0.0; 200],
            band: vec![0.1; 200],
            seeds: 100,
        };
        let mut bound = vec![2.0; 200];
        bound[7] = 0.95;
        bound[9] = 0.95;
        let r = compare_envelope(EnvelopeKind::Linear, &avg, &bound).unwrap();
        assert_eq!((r.violations, r.band_violations), (2, 0));
        assert!((r.slack_min + 0.05).abs() < 1e-12);
        assert!(r.passed());
        bound[11] = 0.95;
        assert!(!compare_envelope(EnvelopeKind::Linear, &avg, &bound).unwrap().passed());
        bound[11] = 2.0;
        bound[9] = 0.5;
        let r = compare_envelope(EnvelopeKind::Linear, &avg, &bound).unwrap();
        assert_eq!(r.band_violations, 1);
        assert!(!r.passed());
    }

    fn trace_with(grads: &[f64]) -> Trace {
        Trace {
            records: grads
                .iter()
                .enumerate()
                .map(|(k, &g)| TraceRecord {
                    k,
                    block: None,
                    f_value: 0.0,
                    grad_norm: g,
                    step_norm: 0.0,
                    noise_norm: 0.0,
                    extra: BTreeMap::new(),
                })
                .collect(),
            steps: vec![],
            iterates: None,
            final_x: vec![],
            cache_audits: vec![],
            stop_reason: StopReason::IterCap,
            warnings: vec![],
            step_size: 1.0,
            proximal: false,
        }
    }

    #[test]
    fn nonconvex_uses_running_min_from_one() {
        let c = rate_constants(1.0, 1.0, 1.0, 1, 0.5).unwrap();
        // ‖∇f(x⁰)‖ is huge but excluded from the min
        let traces: Vec<_> = (0..MIN_SEEDS).map(|_| trace_with(&[1e9, 2.0, 3.0, 1.0])).collect();
        let r = envelope_nonconvex(&traces, &c, 1.0, NoiseBudget::SquareSummable { energy: 0.0 }).unwrap();
        assert_eq!(r.k_grid, vec![1, 2, 3]);
        assert_eq!(r.empirical_curve, vec![4.0, 4.0, 1.0]);
        // 2C₁F₀/((k+1)π_min) with C₁ = 16
        assert_eq!(r.bound_curve[0], 2.0 * 16.0 / (2.0 * 0.5));
        assert!(r.passed());
        assert!(envelope_nonconvex(&traces[..5], &c, 1.0, NoiseBudget::Bounded { level: 0.0 }).is_err());
    }
}
