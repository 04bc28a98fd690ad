use serde::{Deserialize, Serialize};

use super::{build_random_walk, ChainError, Graph, Repetition, TransitionSchedule, WalkPolicy};
use crate::linalg::from_rows;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Simple,
    LazyMetropolis,
}

/// JSON description of a chain. Node indices are 1-based.
///
/// Either `policy` (with `edges`, and `target` for Metropolis) builds a
/// random walk, or `matrices` gives the transition matrices explicitly; in
/// the latter case `edges`, when non-empty, is the support graph, otherwise
/// the support is read off the positive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDescription {
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    #[serde(default = "default_true")]
    pub self_loops: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub repetition: Repetition,
}

fn default_true() -> bool {
    true
}

impl ChainDescription {
    pub fn from_json(text: &str) -> Result<Self, ChainError> {
        serde_json::from_str(text).map_err(|e| ChainError::Description(e.to_string()))
    }

    pub fn to_schedule(&self) -> Result<TransitionSchedule, ChainError> {
        let edges = self
            .edges
            .iter()
            .map(|&[i, j]| {
                if i == 0 || j == 0 {
                    Err(ChainError::Description("node indices are 1-based".into()))
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        match (&self.matrices, self.policy) {
            (Some(mats), None) => {
                let mats = mats
                    .iter()
                    .map(|rows| {
                        from_rows(rows).ok_or_else(|| ChainError::Description("ragged matrix".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if edges.is_empty() {
                    TransitionSchedule::from_matrices(mats, self.repetition)
                } else {
                    let g = Graph::new(self.n, edges, self.self_loops)?;
                    TransitionSchedule::new(mats, self.repetition, g)
                }
            }
            (None, Some(policy)) => {
                let g = Graph::new(self.n, edges, self.self_loops)?;
                let policy = match policy {
                    PolicyName::Simple => WalkPolicy::Simple,
                    PolicyName::LazyMetropolis => WalkPolicy::LazyMetropolis {
                        target: self.target.clone().unwrap_or_else(|| vec![1.0; self.n]),
                    },
                };
                build_random_walk(&g, &policy)
            }
            _ => Err(ChainError::Description(
                "exactly one of `policy` or `matrices` must be given".into(),
            )),
        }
    }
}
