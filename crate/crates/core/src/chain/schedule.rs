use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ChainError, Graph, ROW_SUM_TOL};

/// How a finite list of matrices extends to all `k ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Repetition {
    /// `P(k) = M[k mod len]`.
    #[default]
    Cycle,
    /// `P(k) = M[min(k, len - 1)]`.
    HoldLast,
}

/// Row-stochastic transition matrices `P(k)` supported on a graph.
///
/// A single matrix is the time-homogeneous case.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSchedule {
    matrices: Vec<DMatrix<f64>>,
    repetition: Repetition,
    support: Graph,
}

/// Rule turning a graph into a transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum WalkPolicy {
    /// Uniform over the admissible next states (neighbors plus the self-loop if present).
    Simple,
    /// Metropolis acceptance against `target`, proposals uniform over the
    /// admissible next states.
    LazyMetropolis { target: Vec<f64> },
}

impl TransitionSchedule {
    pub fn new(
        matrices: Vec<DMatrix<f64>>,
        repetition: Repetition,
        support: Graph,
    ) -> Result<Self, ChainError> {
        if matrices.is_empty() {
            return Err(ChainError::EmptySchedule);
        }
        let n = support.node_count();
        for (index, p) in matrices.iter().enumerate() {
            validate_matrix(index, p, n)?;
            for i in 0..n {
                for j in 0..n {
                    if i != j && p[(i, j)] > 0.0 && !support.has_edge(i, j) {
                        return Err(ChainError::OffSupport { from: i, to: j });
                    }
                }
            }
        }
        Ok(Self { matrices, repetition, support })
    }

    pub fn homogeneous(p: DMatrix<f64>, support: Graph) -> Result<Self, ChainError> {
        Self::new(vec![p], Repetition::Cycle, support)
    }

    /// Homogeneous schedule whose support graph is read off the positive entries.
    pub fn from_matrix(p: DMatrix<f64>) -> Result<Self, ChainError> {
        Self::from_matrices(vec![p], Repetition::Cycle)
    }

    /// Schedule whose support graph is the union of the matrices' positive entries.
    pub fn from_matrices(
        matrices: Vec<DMatrix<f64>>,
        repetition: Repetition,
    ) -> Result<Self, ChainError> {
        let first = matrices.first().ok_or(ChainError::EmptySchedule)?;
        let n = first.nrows();
        for (index, p) in matrices.iter().enumerate() {
            validate_matrix(index, p, n)?;
        }
        let mut edges = Vec::new();
        let mut all_diag = true;
        for i in 0..n {
            all_diag &= matrices.iter().any(|p| p[(i, i)] > 0.0);
            for j in 0..n {
                if i != j && matrices.iter().any(|p| p[(i, j)] > 0.0) {
                    edges.push((i, j));
                }
            }
        }
        let support = Graph::new(n, edges, all_diag)?;
        Self::new(matrices, repetition, support)
    }

    pub fn state_count(&self) -> usize {
        self.support.node_count()
    }

    pub fn support(&self) -> &Graph {
        &self.support
    }

    pub fn repetition(&self) -> Repetition {
        self.repetition
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn is_homogeneous(&self) -> bool {
        self.matrices.len() == 1
    }

    /// `P(k)`.
    pub fn matrix_at(&self, k: usize) -> &DMatrix<f64> {
        let len = self.matrices.len();
        match self.repetition {
            Repetition::Cycle => &self.matrices[k % len],
            Repetition::HoldLast => &self.matrices[k.min(len - 1)],
        }
    }

    /// Number of distinct starting offsets `m` for products `Φ(m, n)`:
    /// every `m` behaves like one of `0..offset_classes()`.
    pub(crate) fn offset_classes(&self) -> usize {
        self.matrices.len()
    }
}

fn validate_matrix(index: usize, p: &DMatrix<f64>, n: usize) -> Result<(), ChainError> {
    let bad = |reason: String| ChainError::InvalidMatrix { index, reason };
    if p.nrows() != n || p.ncols() != n {
        return Err(bad(format!("expected {n}x{n}, got {}x{}", p.nrows(), p.ncols())));
    }
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let v = p[(i, j)];
            if !v.is_finite() || v < 0.0 {
                return Err(bad(format!("entry ({i}, {j}) = {v} is not a probability")));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(bad(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Random-walk transition matrix on `graph` under `policy`.
///
/// `LazyMetropolis` proposes uniformly over the admissible next states of
/// `i` and accepts a move to `j` with probability
/// `min(1, target_j deg(i) / (target_i deg(j)))`, which makes `target`
/// stationary (detailed balance). On graphs with self-loops the
/// self-proposal already gives every state positive holding mass; on graphs
/// without them the kernel is averaged with the identity, so each state
/// holds with probability at least 1/2. Either way the chain is aperiodic.
pub fn build_random_walk(
    graph: &Graph,
    policy: &WalkPolicy,
) -> Result<TransitionSchedule, ChainError> {
    let n = graph.node_count();
    for i in 0..n {
        if graph.degree(i) == 0 {
            return Err(ChainError::DeadEnd(i));
        }
    }
    let p = match policy {
        WalkPolicy::Simple => DMatrix::from_fn(n, n, |i, j| {
            if graph.has_edge(i, j) {
                1.0 / graph.degree(i) as f64
            } else {
                0.0
            }
        }),
        WalkPolicy::LazyMetropolis { target } => {
            let target = validate_target(target, n)?;
            if !graph.is_symmetric() {
                return Err(ChainError::AsymmetricGraph);
            }
            let mut p = DMatrix::zeros(n, n);
            for i in 0..n {
                let di = graph.degree(i) as f64;
                let mut moved = 0.0;
                for j in graph.neighbors(i) {
                    let dj = graph.degree(j) as f64;
                    let accept = (target[j] * di / (target[i] * dj)).min(1.0);
                    p[(i, j)] = accept / di;
                    moved += p[(i, j)];
                }
                p[(i, i)] = 1.0 - moved;
            }
            if !graph.self_loops() {
                p = (p + DMatrix::identity(n, n)) * 0.5;
            }
            p
        }
    };
    TransitionSchedule::homogeneous(normalize_rows(p), graph.clone())
}

fn validate_target(target: &[f64], n: usize) -> Result<Vec<f64>, ChainError> {
    if target.len() != n {
        return Err(ChainError::InvalidTarget(format!(
            "length {} does not match {n} nodes",
            target.len()
        )));
    }
    if let Some(i) = target.iter().position(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(ChainError::InvalidTarget(format!("entry {i} is not strictly positive")));
    }
    let s: f64 = target.iter().sum();
    Ok(target.iter().map(|t| t / s).collect())
}

// Rounding in the row construction can leave sums a few ulps away from 1.
fn normalize_rows(mut p: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..p.nrows() {
        let s: f64 = p.row(i).sum();
        p.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_uniform_metropolis_is_uniform() {
        let g = Graph::complete(4, true).unwrap();
        let s = build_random_walk(&g, &WalkPolicy::LazyMetropolis { target: vec![0.25; 4] }).unwrap();
        for v in s.matrix_at(0).iter() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn two_node_simple_walk() {
        let g = Graph::path(2, true).unwrap();
        let s = build_random_walk(&g, &WalkPolicy::Simple).unwrap();
        for v in s.matrix_at(0).iter() {
            assert_eq!(*v, 0.5);
        }
    }

    #[test]
    fn periodic_walk_constructs() {
        let g = Graph::path(2, false).unwrap();
        let s = build_random_walk(&g, &WalkPolicy::Simple).unwrap();
        assert_eq!(s.matrix_at(0)[(0, 1)], 1.0);
        assert_eq!(s.matrix_at(0)[(0, 0)], 0.0);
    }

    #[test]
    fn metropolis_without_loops_is_lazy() {
        let g = Graph::ring(5, false).unwrap();
        let target = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let s = build_random_walk(&g, &WalkPolicy::LazyMetropolis { target }).unwrap();
        for i in 0..5 {
            assert!(s.matrix_at(0)[(i, i)] >= 0.5);
        }
    }

    #[test]
    fn rejects_zero_target_and_directed_graph() {
        let g = Graph::ring(3, true).unwrap();
        let err = build_random_walk(&g, &WalkPolicy::LazyMetropolis { target: vec![0.5, 0.5, 0.0] });
        assert!(matches!(err, Err(ChainError::InvalidTarget(_))));
        let directed = Graph::new(3, [(0, 1), (1, 2), (2, 0)], true).unwrap();
        let err = build_random_walk(&directed, &WalkPolicy::LazyMetropolis { target: vec![1.0; 3] });
        assert_eq!(err, Err(ChainError::AsymmetricGraph));
    }

    #[test]
    fn schedule_validation() {
        let g = Graph::path(3, true).unwrap();
        let off = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
        assert_eq!(
            TransitionSchedule::homogeneous(off, g.clone()),
            Err(ChainError::OffSupport { from: 0, to: 2 })
        );
        let not_stochastic = DMatrix::from_row_slice(3, 3, &[0.5, 0.4, 0.0, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
        assert!(matches!(
            TransitionSchedule::homogeneous(not_stochastic, g),
            Err(ChainError::InvalidMatrix { .. })
        ));
    }

    #[test]
    fn repetition_rules() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let cyc = TransitionSchedule::from_matrices(vec![a.clone(), b.clone()], Repetition::Cycle).unwrap();
        assert_eq!(cyc.matrix_at(3), &b);
        assert_eq!(cyc.matrix_at(4), &a);
        let hold = TransitionSchedule::from_matrices(vec![a, b.clone()], Repetition::HoldLast).unwrap();
        assert_eq!(hold.matrix_at(100), &b);
    }
}
