use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `log value` against `log k`.
    LogLog,
    /// `log value` against `k`.
    SemiLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares on the transformed points whose `k` falls in `range`.
pub fn fit_rate(curve: &[(usize, f64)], range: RangeInclusive<usize>, kind: FitKind) -> Result<RateFit, AnalysisError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(k, v) in curve.iter().filter(|p| range.contains(&p.0)) {
        if !(v > 0.0) {
            return Err(AnalysisError::NonPositive { k: k as f64, value: v });
        }
        if kind == FitKind::LogLog && k == 0 {
            return Err(AnalysisError::Invalid("log-log fit needs k ≥ 1".into()));
        }
        xs.push(match kind {
            FitKind::LogLog => (k as f64).ln(),
            FitKind::SemiLog => k as f64,
        });
        ys.push(v.ln());
    }
    let n = xs.len();
    if n < 2 {
        return Err(AnalysisError::Invalid(format!("{n} points in fit range")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Invalid("fit range has a single distinct k".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept, r_squared, points: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let curve: Vec<_> = (1..=200).map(|k| (k, 7.0 / k as f64)).collect();
        let fit = fit_rate(&curve, 1..=200, FitKind::LogLog).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_exponential() {
        let curve: Vec<_> = (0..100).map(|k| (k, 3.0 * 0.9f64.powi(k as i32))).collect();
        let fit = fit_rate(&curve, 0..=99, FitKind::SemiLog).unwrap();
        assert!((fit.slope - 0.9f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn range_restricts_points() {
        let curve: Vec<_> = (1..=100).map(|k| (k, if k < 10 { 1.0 } else { 1.0 / (k * k) as f64 })).collect();
        let fit = fit_rate(&curve, 10..=100, FitKind::LogLog).unwrap();
        assert_eq!(fit.points, 91);
        assert!((fit.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive() {
        let curve = vec![(1, 1.0), (2, 0.0), (3, 0.5)];
        assert!(matches!(fit_rate(&curve, 1..=3, FitKind::LogLog), Err(AnalysisError::NonPositive { .. })));
        assert!(fit_rate(&curve, 1..=1, FitKind::LogLog).is_err());
    }
}
