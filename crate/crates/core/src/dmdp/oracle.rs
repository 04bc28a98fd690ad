use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use super::DmdpModel;
use crate::chain::{stationary_distribution, ChainError, TransitionSchedule};
use crate::rng::{sample_categorical, StreamRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("simulator budget of {0} transitions exhausted")]
    Exhausted(u64),
    #[error("column estimates from rows need a reversible model")]
    NotReversible,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Empirical row of `P` with a 95% simultaneous error bound in `ℓ∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowEstimate {
    pub probs: Vec<f64>,
    /// `sqrt(ln(2N/0.05) / (2M))`, from Hoeffding's inequality and a union
    /// bound over the `N` entries.
    pub error_bound: f64,
}

/// Frequencies of `samples` simulated transitions out of `state`.
pub fn monte_carlo_row<R: Rng + ?Sized>(model: &DmdpModel, state: usize, samples: usize, rng: &mut R) -> RowEstimate {
    assert!(samples >= 1, "need at least one sample");
    let n = model.state_count();
    let row: Vec<f64> = model.transition().row(state).iter().copied().collect();
    let mut counts = vec![0usize; n];
    for _ in 0..samples {
        counts[sample_categorical(&row, rng)] += 1;
    }
    let m = samples as f64;
    RowEstimate {
        probs: counts.into_iter().map(|c| c as f64 / m).collect(),
        error_bound: ((2.0 * n as f64 / 0.05).ln() / (2.0 * m)).sqrt(),
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Exact,
    MonteCarlo { samples: usize, rng: StreamRng, pi: Vec<f64>, budget: Option<u64>, used: u64 },
}

/// Access to rows and columns of `P`, exact or simulated.
#[derive(Debug, Clone)]
pub struct TransitionOracle {
    model: DmdpModel,
    kind: Kind,
}

impl TransitionOracle {
    pub fn exact(model: &DmdpModel) -> Self {
        Self { model: model.clone(), kind: Kind::Exact }
    }

    /// `samples` simulated transitions per query, at most `budget` in total.
    /// Columns are rescaled rows, `P_{j,i} = π_i P_{i,j} / π_j`, which needs
    /// detailed balance.
    pub fn monte_carlo(
        model: &DmdpModel,
        samples: usize,
        rng: StreamRng,
        budget: Option<u64>,
    ) -> Result<Self, OracleError> {
        assert!(samples >= 1, "need at least one sample per query");
        let sched = TransitionSchedule::from_matrix(model.transition().clone())?;
        let pi = stationary_distribution(&sched)?.pi;
        let p = model.transition();
        let n = model.state_count();
        for i in 0..n {
            for j in 0..n {
                if (pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs() > 1e-10 {
                    return Err(OracleError::NotReversible);
                }
            }
        }
        Ok(Self { model: model.clone(), kind: Kind::MonteCarlo { samples, rng, pi, budget, used: 0 } })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, Kind::Exact)
    }

    pub fn transitions_used(&self) -> u64 {
        match &self.kind {
            Kind::Exact => 0,
            Kind::MonteCarlo { used, .. } => *used,
        }
    }

    pub fn row(&mut self, i: usize) -> Result<Vec<f64>, OracleError> {
        let model = &self.model;
        match &mut self.kind {
            Kind::Exact => Ok(model.transition().row(i).iter().copied().collect()),
            Kind::MonteCarlo { samples, rng, budget, used, .. } => {
                if let Some(b) = *budget {
                    if *used + *samples as u64 > b {
                        return Err(OracleError::Exhausted(b));
                    }
                }
                *used += *samples as u64;
                Ok(monte_carlo_row(model, i, *samples, rng).probs)
            }
        }
    }

    pub fn column(&mut self, i: usize) -> Result<Vec<f64>, OracleError> {
        if self.is_exact() {
            return Ok(self.model.transition().column(i).iter().copied().collect());
        }
        let row = self.row(i)?;
        let Kind::MonteCarlo { pi, .. } = &self.kind else { unreachable!() };
        Ok((0..row.len()).map(|j| pi[i] * row[j] / pi[j]).collect())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.model.transition()
    }
}
