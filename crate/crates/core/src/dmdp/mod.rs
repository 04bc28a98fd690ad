//! Policy evaluation for a finite discounted MDP.
//!
//! The value function solves `v = r + discount·Pv`. The coordinate solver
//! minimizes `(1/(2N))‖Av − r‖² + (λ/2)‖v‖²` with `A = I − discount·P`,
//! keeping `u = Av − r` up to date with one column of `P` per step.

mod oracle;

pub use oracle::{monte_carlo_row, OracleError, RowEstimate, TransitionOracle};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{TransitionSchedule, ROW_SUM_TOL};
use crate::linalg::{from_rows, norm_inf, spectral_norm, symmetric_eigenvalues, to_rows};
use crate::objective::{BlockLayout, BlockObjective, Convexity, ResidualCache, Smoothness};
use crate::rng::SeedStreams;
use crate::solver::{NoPerturbation, Perturbation, RunError, Solver, SolverConfig, SolverError, StepContext, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmdpError {
    #[error("discount {0} must lie strictly between 0 and 1")]
    Discount(f64),
    #[error("transition matrix row {row} is not a probability vector")]
    NotStochastic { row: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("lambda {0} must be nonnegative")]
    Lambda(f64),
    #[error("invalid model description: {0}")]
    Description(String),
}

/// Policy-induced chain `P`, rewards `r` and discount factor.
#[derive(Debug, Clone, PartialEq)]
pub struct DmdpModel {
    p: DMatrix<f64>,
    r: Vec<f64>,
    discount: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    r: Vec<f64>,
    discount: f64,
}

impl DmdpModel {
    pub fn new(p: DMatrix<f64>, r: Vec<f64>, discount: f64) -> Result<Self, DmdpError> {
        let n = r.len();
        if p.nrows() != n || p.ncols() != n || n == 0 {
            return Err(DmdpError::Dimension(format!("P is {}x{}, r has {n}", p.nrows(), p.ncols())));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(DmdpError::Discount(discount));
        }
        for i in 0..n {
            let row = p.row(i);
            if row.iter().any(|&v| !(v >= 0.0)) || (row.sum() - 1.0).abs() > ROW_SUM_TOL {
                return Err(DmdpError::NotStochastic { row: i });
            }
        }
        Ok(Self { p, r, discount })
    }

    /// Dense rows drawn uniformly and normalized; rewards uniform in `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(n: usize, discount: f64, rng: &mut R) -> Result<Self, DmdpError> {
        let mut p = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() + 1e-3);
        for i in 0..n {
            let s = p.row(i).sum();
            p.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let r = (0..n).map(|_| rng.random::<f64>()).collect();
        Self::new(p, r, discount)
    }

    pub fn from_json(text: &str) -> Result<Self, DmdpError> {
        let m: ModelJson = serde_json::from_str(text).map_err(|e| DmdpError::Description(e.to_string()))?;
        let p = from_rows(&m.p).ok_or_else(|| DmdpError::Description("ragged transition matrix".into()))?;
        Self::new(p, m.r, m.discount)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelJson { p: to_rows(&self.p), r: self.r.clone(), discount: self.discount })
            .expect("plain numbers serialize")
    }

    pub fn state_count(&self) -> usize {
        self.r.len()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn rewards(&self) -> &[f64] {
        &self.r
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// `A = I − discount·P`.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        let n = self.state_count();
        DMatrix::identity(n, n) - &self.p * self.discount
    }
}

/// Value vector with its Bellman residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub v: Vec<f64>,
    pub residual: f64,
}

impl ValueEstimate {
    pub fn new(model: &DmdpModel, v: Vec<f64>) -> Self {
        let residual = bellman_residual(model, &v);
        Self { v, residual }
    }
}

/// `‖v − r − discount·Pv‖∞`.
pub fn bellman_residual(model: &DmdpModel, v: &[f64]) -> f64 {
    let vv = DVector::from_column_slice(v);
    let res = &vv - DVector::from_column_slice(&model.r) - &model.p * &vv * model.discount;
    norm_inf(res.as_slice())
}

/// Dense LU solve of `(I − discount·P)v = r`.
pub fn direct_solve(model: &DmdpModel) -> ValueEstimate {
    let v = model
        .system_matrix()
        .lu()
        .solve(&DVector::from_column_slice(&model.r))
        .expect("I − discount·P is nonsingular for discount < 1");
    ValueEstimate::new(model, v.iter().copied().collect())
}

/// Minimizer of the regularized objective, from the dense normal equations
/// `((1/N)AᵀA + λI)v = (1/N)Aᵀr`.
pub fn regularized_solve(model: &DmdpModel, lambda: f64) -> Vec<f64> {
    let n = model.state_count();
    let a = model.system_matrix();
    let lhs = a.transpose() * &a / n as f64 + DMatrix::identity(n, n) * lambda;
    let rhs = a.transpose() * DVector::from_column_slice(&model.r) / n as f64;
    lhs.lu().solve(&rhs).expect("positive definite").iter().copied().collect()
}

/// `f(v) = (1/(2N))‖Av − r‖² + (λ/2)‖v‖²` with cache `u = Av − r`.
#[derive(Debug, Clone)]
pub struct DmdpObjective {
    model: DmdpModel,
    lambda: f64,
    layout: BlockLayout,
    smoothness: Smoothness,
}

impl DmdpObjective {
    pub fn new(model: DmdpModel, lambda: f64) -> Result<Self, DmdpError> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(DmdpError::Lambda(lambda));
        }
        let n = model.state_count();
        let nf = n as f64;
        let a = model.system_matrix();
        let block = (0..n).map(|i| a.column(i).norm_squared()).fold(0.0, f64::max) / nf + lambda;
        let full = spectral_norm(&a).powi(2) / nf + lambda;
        let hess = a.transpose() * &a / nf + DMatrix::identity(n, n) * lambda;
        let lo = symmetric_eigenvalues(&hess)[0];
        let smoothness = Smoothness {
            block_lipschitz: block,
            full_lipschitz: full,
            strong_convexity: Some(lo),
            restricted_growth: Some(0.5 * lo),
            known_min: None,
            convexity: Convexity::Convex,
        };
        let mut obj = Self { model, lambda, layout: BlockLayout::scalar(n), smoothness };
        let v = regularized_solve(&obj.model, lambda);
        obj.smoothness.known_min = Some(if lambda == 0.0 { 0.0 } else { obj.value(&v) });
        Ok(obj)
    }

    pub fn model(&self) -> &DmdpModel {
        &self.model
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn residual(&self, v: &[f64]) -> Vec<f64> {
        let vv = DVector::from_column_slice(v);
        (self.model.system_matrix() * vv - DVector::from_column_slice(&self.model.r)).iter().copied().collect()
    }

    /// `(1/N)(u_i − discount·⟨column, u⟩) + λv_i` for a given column of `P`.
    pub fn block_gradient_with_column(&self, v: &[f64], u: &[f64], i: usize, column: &[f64]) -> f64 {
        let pu: f64 = column.iter().zip(u).map(|(p, x)| p * x).sum();
        (u[i] - self.model.discount * pu) / self.model.state_count() as f64 + self.lambda * v[i]
    }
}

impl BlockObjective for DmdpObjective {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    fn value(&self, v: &[f64]) -> f64 {
        let u = self.residual(v);
        let n = self.model.state_count() as f64;
        0.5 * u.iter().map(|x| x * x).sum::<f64>() / n + 0.5 * self.lambda * v.iter().map(|x| x * x).sum::<f64>()
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let u = self.residual(v);
        (0..v.len())
            .map(|i| {
                let col: Vec<f64> = self.model.p.column(i).iter().copied().collect();
                self.block_gradient_with_column(v, &u, i, &col)
            })
            .collect()
    }

    fn init_cache(&self, v: &[f64]) -> Option<ResidualCache> {
        Some(ResidualCache { name: "Av-r", values: self.residual(v) })
    }

    fn block_gradient_cached(&self, v: &[f64], cache: Option<&ResidualCache>, block: usize) -> Vec<f64> {
        match cache {
            Some(c) => {
                let col: Vec<f64> = self.model.p.column(block).iter().copied().collect();
                vec![self.block_gradient_with_column(v, &c.values, block, &col)]
            }
            None => self.block_gradient(v, block),
        }
    }

    /// `u ← u + δ(e_i − discount·P_{:,i})`.
    fn update_cache(&self, cache: &mut ResidualCache, block: usize, delta: &[f64]) {
        let d = delta[0];
        for (u, p) in cache.values.iter_mut().zip(self.model.p.column(block).iter()) {
            *u -= self.model.discount * p * d;
        }
        cache.values[block] += d;
    }
}

/// Where the coordinate sequence comes from.
#[derive(Debug, Clone)]
pub enum Selection {
    /// The system trajectory itself: the walk on `P`.
    FromModel,
    Chain(Arc<TransitionSchedule>),
}

struct OracleNoise<'a> {
    objective: &'a DmdpObjective,
    oracle: &'a mut TransitionOracle,
}

impl Perturbation for OracleNoise<'_> {
    fn perturb(&mut self, ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError> {
        if self.oracle.is_exact() {
            return Ok(None);
        }
        let cache = ctx.cache.expect("dmdp objective keeps a cache");
        let column = self
            .oracle
            .column(ctx.block)
            .map_err(|e| SolverError::Oracle { k: ctx.k, reason: e.to_string() })?;
        let estimated = self.objective.block_gradient_with_column(ctx.x, &cache.values, ctx.block, &column);
        Ok(Some(vec![estimated - ctx.gradient[0]]))
    }
}

/// Coordinate policy evaluation. With a Monte-Carlo oracle the estimated
/// column drives the step and the difference to the exact block gradient is
/// recorded as noise; the cache always uses the exact column.
pub fn evaluate_policy_mcbcd(
    model: &DmdpModel,
    oracle: &mut TransitionOracle,
    selection: Selection,
    lambda: f64,
    cfg: SolverConfig,
    streams: SeedStreams,
) -> Result<(ValueEstimate, Trace), RunError> {
    let objective = DmdpObjective::new(model.clone(), lambda)
        .map_err(|e| RunError::Invalid(SolverError::Config(e.to_string())))?;
    let schedule = match selection {
        Selection::FromModel => Arc::new(
            TransitionSchedule::from_matrix(model.transition().clone()).map_err(|e| RunError::Invalid(e.into()))?,
        ),
        Selection::Chain(s) => s,
    };
    let solver = Solver::new(&objective, cfg)
        .with_metrics(|v| vec![("bellman_residual".to_string(), bellman_residual(model, v))]);
    let trace = if oracle.is_exact() {
        solver.run_chain_with(schedule, streams, &mut NoPerturbation)?
    } else {
        let mut noise = OracleNoise { objective: &objective, oracle };
        solver.run_chain_with(schedule, streams, &mut noise)?
    };
    Ok((ValueEstimate::new(model, trace.final_x.clone()), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{block_consistency, gradient_check};
    use crate::rng::stream_rng;
    use crate::solver::StopRule;

    fn two_state() -> DmdpModel {
        DmdpModel::new(DMatrix::from_element(2, 2, 0.5), vec![1.0, 0.0], 0.9).unwrap()
    }

    #[test]
    fn hand_instance() {
        let m = two_state();
        assert!(bellman_residual(&m, &[5.5, 4.5]) < 1e-15);
        let v = direct_solve(&m);
        assert!((v.v[0] - 5.5).abs() < 1e-12 && (v.v[1] - 4.5).abs() < 1e-12);
        assert!(v.residual <= 1e-10);
        assert_eq!(v.residual, bellman_residual(&m, &v.v));
    }

    #[test]
    fn trivial_fixed_points() {
        let m = DmdpModel::new(DMatrix::from_element(2, 2, 0.5), vec![0.0, 0.0], 0.9).unwrap();
        assert_eq!(bellman_residual(&m, &[0.0, 0.0]), 0.0);
        let myopic = DmdpModel::new(DMatrix::identity(2, 2), vec![3.0, -1.0], 1e-12).unwrap();
        assert!(bellman_residual(&myopic, &[3.0, -1.0]) < 1e-11);
        let constant = DmdpModel::random(5, 0.8, &mut stream_rng(1, 0)).unwrap();
        let constant = DmdpModel::new(constant.transition().clone(), vec![2.0; 5], 0.8).unwrap();
        for x in direct_solve(&constant).v {
            assert!((x - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_matches_geometric_series() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let m = DmdpModel::new(p.clone(), vec![1.0, 2.0, 4.0], 0.5).unwrap();
        let mut series = DVector::zeros(3);
        let mut term = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        for _ in 0..=100 {
            series += &term;
            term = &p * term * 0.5;
        }
        for (a, b) in direct_solve(&m).v.iter().zip(series.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn objective_gradients_and_cache() {
        let m = DmdpModel::random(6, 0.9, &mut stream_rng(2, 0)).unwrap();
        for lambda in [0.0, 0.1] {
            let f = DmdpObjective::new(m.clone(), lambda).unwrap();
            let v: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
            assert!(gradient_check(&f, &v, 1e-6) < 1e-5);
            assert!(block_consistency(&f, &v) < 1e-12);
            let mut c = f.init_cache(&v).unwrap();
            f.update_cache(&mut c, 3, &[0.7]);
            let mut moved = v.clone();
            moved[3] += 0.7;
            for (a, b) in c.values.iter().zip(f.init_cache(&moved).unwrap().values) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert_eq!(
            DmdpModel::new(DMatrix::from_element(2, 2, 0.5), vec![0.0; 2], 1.0).unwrap_err(),
            DmdpError::Discount(1.0)
        );
        assert!(DmdpModel::new(DMatrix::from_element(2, 2, 0.6), vec![0.0; 2], 0.5).is_err());
        assert!(DmdpModel::from_json(r#"{"P": [[1.0], [0.5, 0.5]], "r": [0, 0], "discount": 0.5}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = DmdpModel::from_json(r#"{"P": [[0.5, 0.5], [0.5, 0.5]], "r": [1, 0], "discount": 0.9}"#).unwrap();
        assert_eq!(m, two_state());
        assert_eq!(DmdpModel::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn zero_reward_stays_at_zero() {
        let m = DmdpModel::new(DMatrix::from_element(3, 3, 1.0 / 3.0), vec![0.0; 3], 0.9).unwrap();
        let f = DmdpObjective::new(m.clone(), 0.0).unwrap();
        let cfg = SolverConfig::new(1.0 / f.smoothness().block_lipschitz, 500);
        let mut oracle = TransitionOracle::exact(&m);
        let (est, _) = evaluate_policy_mcbcd(&m, &mut oracle, Selection::FromModel, 0.0, cfg, SeedStreams::new(0, 0)).unwrap();
        assert_eq!(est.v, vec![0.0; 3]);
    }

    #[test]
    fn regularized_run_matches_normal_equations() {
        let m = DmdpModel::random(5, 0.9, &mut stream_rng(4, 0)).unwrap();
        let f = DmdpObjective::new(m.clone(), 0.05).unwrap();
        let mut cfg = SolverConfig::new(1.0 / f.smoothness().block_lipschitz, 200_000);
        cfg.stop = StopRule::GradNorm { tol: 1e-12 };
        cfg.record_every = 100;
        let mut oracle = TransitionOracle::exact(&m);
        let (est, _) = evaluate_policy_mcbcd(&m, &mut oracle, Selection::FromModel, 0.05, cfg, SeedStreams::new(1, 0)).unwrap();
        let normal = regularized_solve(&m, 0.05);
        for (a, b) in est.v.iter().zip(&normal) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!(dist(&est.v, &direct_solve(&m).v) > 1e-3);
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}
