//! Message accounting for the token walk.
//!
//! The block sequence is read as a token that is handed along the graph:
//! after updating block `i_k` the holder forwards the token to `i_{k+1}`,
//! one message per iteration (a self-loop hands the token to itself).
//! Comparators price the same number of block updates under an all-reduce
//! scheme that needs `2(N−1)` messages per full update.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCount {
    /// 1-based endpoints.
    pub from: usize,
    pub to: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    pub blocks: usize,
    pub iterations: u64,
    pub messages: u64,
    pub self_loop_messages: u64,
    pub edges: Vec<EdgeCount>,
    /// `2(N−1)`.
    pub allreduce_per_full_update: u64,
    /// `⌈K/N⌉ · 2(N−1)` for `K` block updates.
    pub allreduce_equivalent: u64,
}

impl CommStats {
    /// `path` holds `i_0, …, i_K` for `K` iterations.
    pub fn from_path(blocks: usize, path: &[usize]) -> Self {
        let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for w in path.windows(2) {
            *counts.entry((w[0], w[1])).or_default() += 1;
        }
        let iterations = path.len().saturating_sub(1) as u64;
        Self::from_counts(blocks, iterations, counts)
    }

    fn from_counts(blocks: usize, iterations: u64, counts: BTreeMap<(usize, usize), u64>) -> Self {
        let per_update = 2 * (blocks as u64).saturating_sub(1);
        Self {
            blocks,
            iterations,
            messages: counts.values().sum(),
            self_loop_messages: counts.iter().filter(|((i, j), _)| i == j).map(|(_, c)| c).sum(),
            edges: counts.into_iter().map(|((i, j), count)| EdgeCount { from: i + 1, to: j + 1, count }).collect(),
            allreduce_per_full_update: per_update,
            allreduce_equivalent: iterations.div_ceil(blocks.max(1) as u64) * per_update,
        }
    }

    /// Sums counts over replicas of the same experiment.
    pub fn combine(parts: &[CommStats]) -> Option<Self> {
        let first = parts.first()?;
        let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        let mut iterations = 0;
        let mut equivalent = 0;
        for p in parts {
            iterations += p.iterations;
            equivalent += p.allreduce_equivalent;
            for e in &p.edges {
                *counts.entry((e.from - 1, e.to - 1)).or_default() += e.count;
            }
        }
        let mut out = Self::from_counts(first.blocks, iterations, counts);
        out.allreduce_equivalent = equivalent;
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_path() {
        let s = CommStats::from_path(3, &[0, 1, 1, 2, 0]);
        assert_eq!(s.iterations, 4);
        assert_eq!(s.messages, 4);
        assert_eq!(s.self_loop_messages, 1);
        assert_eq!(s.edges[0], EdgeCount { from: 1, to: 2, count: 1 });
        assert_eq!(s.allreduce_per_full_update, 4);
        assert_eq!(s.allreduce_equivalent, 8);
    }

    proptest! {
        #[test]
        fn messages_match_iterations(path in proptest::collection::vec(0usize..6, 1..200)) {
            let s = CommStats::from_path(6, &path);
            prop_assert_eq!(s.messages, s.iterations);
            prop_assert_eq!(s.edges.iter().map(|e| e.count).sum::<u64>(), s.messages);
            let both = CommStats::combine(&[s.clone(), s.clone()]).unwrap();
            prop_assert_eq!(both.messages, 2 * s.messages);
            prop_assert_eq!(both.allreduce_equivalent, 2 * s.allreduce_equivalent);
        }
    }
}
