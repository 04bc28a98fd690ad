use std::collections::{BTreeSet, VecDeque};

use super::{ChainError, MAX_STATES};

/// Directed graph on nodes `0..n` (1-based only at the JSON boundary).
///
/// When `self_loops` is set every node carries an implicit self-loop, so
/// the walk may stay put; explicit `(i, i)` edges are rejected otherwise.
/// Construction fails unless the graph is strongly connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    out: Vec<BTreeSet<usize>>,
    self_loops: bool,
}

impl Graph {
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        self_loops: bool,
    ) -> Result<Self, ChainError> {
        if n == 0 {
            return Err(ChainError::EmptyGraph);
        }
        if n > MAX_STATES {
            return Err(ChainError::TooLarge(n));
        }
        let mut out = vec![BTreeSet::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(ChainError::NodeOutOfRange(i, j));
            }
            if i == j {
                if !self_loops {
                    return Err(ChainError::SelfLoopNotAllowed(i));
                }
                continue;
            }
            out[i].insert(j);
        }
        let g = Self { n, out, self_loops };
        if !g.strongly_connected() {
            return Err(ChainError::NotStronglyConnected);
        }
        Ok(g)
    }

    /// Undirected edges given once each; both directions are inserted.
    pub fn undirected(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        self_loops: bool,
    ) -> Result<Self, ChainError> {
        let both: Vec<_> = edges.into_iter().flat_map(|(i, j)| [(i, j), (j, i)]).collect();
        Self::new(n, both, self_loops)
    }

    pub fn ring(n: usize, self_loops: bool) -> Result<Self, ChainError> {
        Self::undirected(n, (0..n).map(|i| (i, (i + 1) % n)).filter(|(i, j)| i != j), self_loops)
    }

    pub fn path(n: usize, self_loops: bool) -> Result<Self, ChainError> {
        Self::undirected(n, (1..n).map(|i| (i - 1, i)), self_loops)
    }

    pub fn complete(n: usize, self_loops: bool) -> Result<Self, ChainError> {
        Self::new(
            n,
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))),
            self_loops,
        )
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    /// Out-neighbors other than the node itself.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[i].iter().copied()
    }

    /// Number of admissible next states, counting the self-loop if present.
    pub fn degree(&self, i: usize) -> usize {
        self.out[i].len() + usize::from(self.self_loops)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            self.self_loops
        } else {
            self.out[i].contains(&j)
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.out[i].iter().all(|&j| self.out[j].contains(&i)))
    }

    /// Off-diagonal edges in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.out[i].iter().map(move |&j| (i, j)))
            .collect()
    }

    fn strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                let next: Vec<usize> = if forward {
                    self.out[i].iter().copied().collect()
                } else {
                    (0..self.n).filter(|&j| self.out[j].contains(&i)).collect()
                };
                for j in next {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }
}
