use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::solver::Trace;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.96;

/// Per-grid-point mean over seeds with a 95% normal-approximation band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAverage {
    pub k: Vec<usize>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Half-width `1.96·sd/√R`.
    pub band: Vec<f64>,
    pub seeds: usize,
}

impl SeedAverage {
    /// All curves must share one k-grid.
    pub fn from_curves(curves: &[Vec<(usize, f64)>]) -> Result<Self, AnalysisError> {
        let first = curves.first().ok_or_else(|| AnalysisError::Invalid("no curves to average".into()))?;
        let k: Vec<usize> = first.iter().map(|p| p.0).collect();
        for c in curves {
            if c.len() != k.len() || c.iter().zip(&k).any(|(p, &kk)| p.0 != kk) {
                return Err(AnalysisError::Mismatch);
            }
        }
        let r = curves.len() as f64;
        let mut mean = vec![0.0; k.len()];
        let mut sd = vec![0.0; k.len()];
        // Welford updates: identical samples give their value and a zero sd exactly.
        for t in 0..k.len() {
            let (mut m, mut m2) = (0.0, 0.0);
            for (i, c) in curves.iter().enumerate() {
                let v = c[t].1;
                let d = v - m;
                m += d / (i + 1) as f64;
                m2 += d * (v - m);
            }
            mean[t] = m;
            if curves.len() > 1 {
                sd[t] = (m2 / (r - 1.0)).max(0.0).sqrt();
            }
        }
        let band = sd.iter().map(|s| Z95 * s / r.sqrt()).collect();
        Ok(Self { k, mean, sd, band, seeds: curves.len() })
    }

    pub fn points(&self) -> Vec<(usize, f64)> {
        self.k.iter().copied().zip(self.mean.iter().copied()).collect()
    }

    /// Mean at the largest recorded iteration not exceeding `k`.
    pub fn at(&self, k: usize) -> Option<f64> {
        let idx = self.k.partition_point(|&kk| kk <= k);
        (idx > 0).then(|| self.mean[idx - 1])
    }
}

/// `f(x^k) − f_min` at every recorded k.
pub fn objective_error_curve(trace: &Trace, f_min: f64) -> Vec<(usize, f64)> {
    trace.records.iter().map(|r| (r.k, r.f_value - f_min)).collect()
}

/// `min_{1 ≤ t ≤ k} ‖∇f(x^t)‖²` over recorded `t`, for every recorded `k ≥ 1`.
///
/// With `record_every > 1` the minimum runs over recorded iterates only,
/// which can only overstate the true value.
pub fn running_min_grad_sq(trace: &Trace) -> Vec<(usize, f64)> {
    let mut best = f64::INFINITY;
    trace
        .records
        .iter()
        .filter(|r| r.k >= 1)
        .map(|r| {
            best = best.min(r.grad_norm * r.grad_norm);
            (r.k, best)
        })
        .collect()
}

/// Roughly log-spaced integers in `[lo, hi]`, deduplicated.
pub fn log_grid(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    assert!(lo >= 1 && hi >= lo && points >= 2);
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as usize)
        .map(|k| k.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}
