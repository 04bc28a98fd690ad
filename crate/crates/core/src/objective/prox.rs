use serde::{Deserialize, Serialize};

use super::{BlockLayout, ObjectiveError};

/// Closed separable term applied coordinatewise within a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProxTerm {
    Zero,
    L1 { weight: f64 },
    Box { lo: f64, hi: f64 },
}

fn soft_threshold(y: f64, t: f64) -> f64 {
    if y > t {
        y - t
    } else if y < -t {
        y + t
    } else {
        0.0
    }
}

impl ProxTerm {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        match *self {
            ProxTerm::Zero => Ok(()),
            ProxTerm::L1 { weight } if weight >= 0.0 && weight.is_finite() => Ok(()),
            ProxTerm::L1 { weight } => {
                Err(ObjectiveError::InvalidParameter(format!("l1 weight {weight} must be nonnegative")))
            }
            ProxTerm::Box { lo, hi } if lo <= hi => Ok(()),
            ProxTerm::Box { lo, hi } => {
                Err(ObjectiveError::InvalidParameter(format!("empty box [{lo}, {hi}]")))
            }
        }
    }

    /// `g(t)`, `+∞` outside the domain.
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ProxTerm::Zero => 0.0,
            ProxTerm::L1 { weight } => weight * t.abs(),
            ProxTerm::Box { lo, hi } => {
                if (lo..=hi).contains(&t) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `prox_{γg}(y) = argmin_t g(t) + (t − y)²/(2γ)`.
    pub fn prox(&self, y: f64, gamma: f64) -> f64 {
        match *self {
            ProxTerm::Zero => y,
            ProxTerm::L1 { weight } => soft_threshold(y, gamma * weight),
            ProxTerm::Box { lo, hi } => y.clamp(lo, hi),
        }
    }

    /// The operator `y ↦ prox_{γg}(y)` after validating `γ` and the term.
    pub fn operator(self, gamma: f64) -> Result<impl Fn(f64) -> f64, ObjectiveError> {
        if !(gamma > 0.0) {
            return Err(ObjectiveError::InvalidParameter(format!("prox step {gamma} must be positive")));
        }
        self.validate()?;
        Ok(move |y| self.prox(y, gamma))
    }
}

/// `g(x) = Σ_i g_i(x_i)` over the blocks of a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableNonsmooth {
    layout: BlockLayout,
    terms: Vec<ProxTerm>,
}

impl SeparableNonsmooth {
    pub fn uniform(term: ProxTerm, layout: BlockLayout) -> Result<Self, ObjectiveError> {
        let terms = vec![term; layout.block_count()];
        Self::per_block(terms, layout)
    }

    pub fn per_block(terms: Vec<ProxTerm>, layout: BlockLayout) -> Result<Self, ObjectiveError> {
        if terms.len() != layout.block_count() {
            return Err(ObjectiveError::DimensionMismatch(format!(
                "{} terms for {} blocks",
                terms.len(),
                layout.block_count()
            )));
        }
        for t in &terms {
            t.validate()?;
        }
        Ok(Self { layout, terms })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn term(&self, block: usize) -> ProxTerm {
        self.terms[block]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (0..self.terms.len())
            .map(|b| self.block_value(b, &x[self.layout.range(b)]))
            .sum()
    }

    pub fn block_value(&self, block: usize, xb: &[f64]) -> f64 {
        xb.iter().map(|&t| self.terms[block].value(t)).sum()
    }

    pub fn prox_block(&self, block: usize, y: &[f64], gamma: f64) -> Vec<f64> {
        y.iter().map(|&t| self.terms[block].prox(t, gamma)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| *t == ProxTerm::Zero)
    }
}
