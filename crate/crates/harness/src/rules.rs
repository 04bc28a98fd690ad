//! Block-selection rules for baseline comparisons.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use mcbcd_core::chain::TransitionSchedule;
use mcbcd_core::rng::{Purpose, SeedStreams};
use mcbcd_core::select::{BlockSelector, CyclicSelector, IidSelector};
use mcbcd_core::solver::{chain_sampler, InitialBlock};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Textual forms: `markov`, `iid`, `iid:p1,…,pN`, `cyclic`, `cyclic:i1,…,iN`
/// (1-based permutation), `essentially-cyclic:K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionRule {
    Markov,
    Iid { probs: Option<Vec<f64>> },
    Cyclic { order: Option<Vec<usize>> },
    EssentiallyCyclic { period: usize },
}

impl SelectionRule {
    /// Checks the rule against `n` blocks.
    pub fn validate(&self, n: usize) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        match self {
            SelectionRule::Iid { probs: Some(p) } => {
                let s: f64 = p.iter().sum();
                if p.len() != n || p.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return bad(format!("iid probabilities must be {n} nonnegative numbers summing to 1"));
                }
            }
            SelectionRule::Cyclic { order: Some(o) } => {
                if o.len() != n || CyclicSelector::new(o.clone()).is_none() {
                    return bad(format!("cyclic order must be a permutation of 1..={n}"));
                }
            }
            SelectionRule::EssentiallyCyclic { period } if *period < n => {
                return bad(format!("essentially-cyclic period {period} is below the block count {n}"));
            }
            _ => {}
        }
        Ok(())
    }

    /// The selector for one replica. Random rules draw from the replica's
    /// selection stream, so a Markov walk with i.i.d. uniform rows and the
    /// uniform i.i.d. rule see the same indices.
    pub fn selector(
        &self,
        n: usize,
        schedule: &Arc<TransitionSchedule>,
        streams: SeedStreams,
    ) -> Result<Box<dyn BlockSelector>, HarnessError> {
        self.validate(n)?;
        Ok(match self {
            SelectionRule::Markov => {
                if schedule.state_count() != n {
                    return Err(HarnessError::Config("chain size differs from block count".into()));
                }
                Box::new(chain_sampler(schedule.clone(), streams, InitialBlock::Stationary)?.0)
            }
            SelectionRule::Iid { probs } => {
                let rng = streams.rng(Purpose::Selection);
                Box::new(match probs {
                    Some(p) => IidSelector::new(p.clone(), rng),
                    None => IidSelector::uniform(n, rng),
                })
            }
            SelectionRule::Cyclic { order } => Box::new(match order {
                Some(o) => CyclicSelector::new(o.clone()).expect("validated"),
                None => CyclicSelector::natural(n),
            }),
            SelectionRule::EssentiallyCyclic { period } => {
                Box::new(CyclicSelector::essentially_cyclic(n, *period).expect("validated"))
            }
        })
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, SelectionRule::Cyclic { .. } | SelectionRule::EssentiallyCyclic { .. })
    }
}

fn list<T: FromStr>(text: &str) -> Result<Vec<T>, HarnessError> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| HarnessError::Config(format!("cannot parse `{s}`"))))
        .collect()
}

impl FromStr for SelectionRule {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        match (head, tail) {
            ("markov", None) => Ok(SelectionRule::Markov),
            ("iid", None) => Ok(SelectionRule::Iid { probs: None }),
            ("iid", Some(t)) => Ok(SelectionRule::Iid { probs: Some(list(t)?) }),
            ("cyclic", None) => Ok(SelectionRule::Cyclic { order: None }),
            ("cyclic", Some(t)) => {
                let order: Vec<usize> = list(t)?;
                if order.contains(&0) {
                    return Err(HarnessError::Config("cyclic order is 1-based".into()));
                }
                Ok(SelectionRule::Cyclic { order: Some(order.into_iter().map(|i| i - 1).collect()) })
            }
            ("essentially-cyclic", Some(t)) => Ok(SelectionRule::EssentiallyCyclic {
                period: t.trim().parse().map_err(|_| HarnessError::Config(format!("bad period `{t}`")))?,
            }),
            _ => Err(HarnessError::Config(format!("unknown selection rule `{s}`"))),
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        match self {
            SelectionRule::Markov => write!(f, "markov"),
            SelectionRule::Iid { probs: None } => write!(f, "iid"),
            SelectionRule::Iid { probs: Some(p) } => write!(f, "iid:{}", join(p.iter().map(|v| v.to_string()).collect())),
            SelectionRule::Cyclic { order: None } => write!(f, "cyclic"),
            SelectionRule::Cyclic { order: Some(o) } => {
                write!(f, "cyclic:{}", join(o.iter().map(|i| (i + 1).to_string()).collect()))
            }
            SelectionRule::EssentiallyCyclic { period } => write!(f, "essentially-cyclic:{period}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for text in ["markov", "iid", "iid:0.25,0.75", "cyclic", "cyclic:2,1,3", "essentially-cyclic:9"] {
            let rule: SelectionRule = text.parse().unwrap();
            assert_eq!(rule.to_string(), text);
        }
        assert_eq!("cyclic:2,1".parse::<SelectionRule>().unwrap(), SelectionRule::Cyclic { order: Some(vec![1, 0]) });
        for bad in ["walk", "cyclic:0,1", "iid:a", "essentially-cyclic"] {
            assert!(bad.parse::<SelectionRule>().is_err(), "{bad}");
        }
    }

    #[test]
    fn validation() {
        assert!(SelectionRule::Iid { probs: Some(vec![0.5, 0.4]) }.validate(2).is_err());
        assert!(SelectionRule::Iid { probs: Some(vec![0.5, 0.5]) }.validate(3).is_err());
        assert!(SelectionRule::Cyclic { order: Some(vec![0, 0]) }.validate(2).is_err());
        assert!(SelectionRule::EssentiallyCyclic { period: 2 }.validate(3).is_err());
        assert!(SelectionRule::EssentiallyCyclic { period: 5 }.validate(3).is_ok());
    }
}
