//! Named experiments and their default configurations.

use std::path::PathBuf;
use std::sync::Arc;

use mcbcd_core::chain::{
    build_random_walk, default_horizon, internal_tau, stationary_distribution, Graph, TransitionSchedule, WalkPolicy,
};
use mcbcd_core::dca::{default_floor, ErmDualProblem};
use mcbcd_core::dmdp::{DmdpModel, DmdpObjective};
use mcbcd_core::objective::{
    make_multi_agent, make_quadratic, AgentCost, BlockLayout, BlockObjective, CoupledQuartic, LeastSquares, Loss,
    MultiAgentPenaltyObjective, ProxTerm, Quadratic, SeparableNonsmooth,
};
use mcbcd_core::rng::{Purpose, SeedStreams};
use mcbcd_core::solver::StopRule;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{
    ChainParams, ExperimentConfig, GraphKind, NoiseSpec, OutputParams, ProblemParams, SeedParams, SolverParams,
    TraceFormat, WalkKind,
};
use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    QuadraticRing,
    QuadraticSingular,
    QuarticNonconvex,
    LassoMcpbcd,
    DmdpEval,
    MultiAgent,
    Figure1EmpiricalDca,
}

/// One registry row.
#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub experiment: Experiment,
    pub name: &'static str,
    pub description: &'static str,
}

pub fn registry() -> Vec<RegistryEntry> {
    Experiment::ALL
        .iter()
        .map(|&e| RegistryEntry { experiment: e, name: e.name(), description: e.description() })
        .collect()
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::QuadraticRing,
        Experiment::QuadraticSingular,
        Experiment::QuarticNonconvex,
        Experiment::LassoMcpbcd,
        Experiment::DmdpEval,
        Experiment::MultiAgent,
        Experiment::Figure1EmpiricalDca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::QuadraticRing => "quadratic-ring",
            Experiment::QuadraticSingular => "quadratic-singular",
            Experiment::QuarticNonconvex => "quartic-nonconvex",
            Experiment::LassoMcpbcd => "lasso-mcpbcd",
            Experiment::DmdpEval => "dmdp-eval",
            Experiment::MultiAgent => "multi-agent",
            Experiment::Figure1EmpiricalDca => "figure1-empirical-dca",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::QuadraticRing => "strongly convex ring-coupled quadratic, linear-rate envelope",
            Experiment::QuadraticSingular => "convex quadratic with a singular Hessian, sublinear-rate envelope",
            Experiment::QuarticNonconvex => "ring-coupled double-well, nonconvex gradient-norm envelope",
            Experiment::LassoMcpbcd => "l1-regularized least squares with proximal block steps",
            Experiment::DmdpEval => "policy evaluation of a random discounted MDP along its own chain",
            Experiment::MultiAgent => "agents with private costs sharing penalized resource constraints",
            Experiment::Figure1EmpiricalDca => "empirical dual coordinate ascent on a 40-state chain against SDCA",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, HarnessError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| HarnessError::UnknownExperiment(name.into()))
    }

    pub fn default_config(self) -> ExperimentConfig {
        let ring = ChainParams {
            graph: GraphKind::Ring,
            self_loops: true,
            walk: WalkKind::Simple,
            chord_offset: None,
            target_weights: None,
        };
        let solver = |max_iters, record_every| SolverParams {
            step_scale: 1.0,
            max_iters,
            record_every,
            noise: NoiseSpec::None,
            stop: StopRule::IterCap,
        };
        let problem = |size, instance_seed| ProblemParams { size, instance_seed, ..Default::default() };
        let (problem, chain, solver, seeds) = match self {
            Experiment::QuadraticRing => (problem(20, 7), ring, solver(10_000, 10), 100),
            Experiment::QuadraticSingular => (
                ProblemParams { eigen_range: Some([1e-4, 1.0]), ..problem(20, 7) },
                ring,
                solver(10_000, 10),
                100,
            ),
            Experiment::QuarticNonconvex => (
                ProblemParams { cutoff: Some(2.0), coupling: Some(0.5), ..problem(20, 7) },
                ring,
                solver(10_000, 1),
                100,
            ),
            Experiment::LassoMcpbcd => (
                ProblemParams { dimension: Some(100), l1_weight: Some(0.1), ..problem(50, 11) },
                ring,
                SolverParams { step_scale: 0.9, ..solver(100_000, 100) },
                10,
            ),
            Experiment::DmdpEval => (
                ProblemParams { discount: Some(0.9), lambda: Some(0.0), ..problem(10, 3) },
                ChainParams { graph: GraphKind::Model, self_loops: true, ..ring },
                SolverParams { stop: StopRule::GradNorm { tol: 1e-10 }, ..solver(1_000_000, 1000) },
                10,
            ),
            Experiment::MultiAgent => (
                ProblemParams { resources: Some(5), penalty: Some(10.0), ..problem(20, 5) },
                ring,
                solver(20_000, 20),
                20,
            ),
            Experiment::Figure1EmpiricalDca => (
                ProblemParams { dimension: Some(20), lambda: Some(0.1), mass_ratio: Some(3.0), ..problem(40, 42) },
                ChainParams {
                    graph: GraphKind::RingChords,
                    self_loops: true,
                    walk: WalkKind::LazyMetropolis,
                    chord_offset: Some(7),
                    target_weights: Some([1.0, 3.0]),
                },
                solver(10_000, 1),
                100,
            ),
        };
        ExperimentConfig {
            experiment: self.name().into(),
            problem,
            chain,
            solver,
            seeds: SeedParams { count: seeds, base: 1 },
            output: OutputParams {
                dir: PathBuf::from("runs").join(self.name()),
                formats: vec![TraceFormat::Csv, TraceFormat::Jsonl],
            },
        }
    }
}

/// The objective of an experiment with whatever extra structure its runner needs.
pub enum Problem {
    Quadratic(Quadratic),
    Quartic(CoupledQuartic),
    MultiAgent(MultiAgentPenaltyObjective),
    Lasso { objective: LeastSquares, penalty: SeparableNonsmooth },
    Dmdp { model: DmdpModel, objective: DmdpObjective, lambda: f64, oracle_samples: Option<usize> },
    EmpiricalDca { problem: ErmDualProblem, floor: f64 },
}

impl Problem {
    pub fn objective(&self) -> &dyn BlockObjective {
        match self {
            Problem::Quadratic(q) => q,
            Problem::Quartic(q) => q,
            Problem::MultiAgent(m) => m,
            Problem::Lasso { objective, .. } => objective,
            Problem::Dmdp { objective, .. } => objective,
            Problem::EmpiricalDca { problem, .. } => problem,
        }
    }

    pub fn nonsmooth(&self) -> Option<&SeparableNonsmooth> {
        match self {
            Problem::Lasso { penalty, .. } => Some(penalty),
            _ => None,
        }
    }
}

/// Derived quantities recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceInfo {
    pub blocks: usize,
    pub dim: usize,
    pub block_lipschitz: f64,
    pub full_lipschitz: f64,
    pub step_size: f64,
    pub f0: f64,
    pub f_min: Option<f64>,
    pub pi_min: f64,
    /// `π*_min/2`-mixing time, computed for the envelope experiments.
    pub tau: Option<usize>,
    pub restricted_growth: Option<f64>,
    /// Level-set diameter used by the sublinear envelope.
    pub radius: Option<f64>,
    pub frequency_floor: Option<f64>,
}

pub struct Instance {
    pub experiment: Experiment,
    pub schedule: Arc<TransitionSchedule>,
    pub problem: Problem,
    pub x0: Vec<f64>,
    pub info: InstanceInfo,
}

fn need<T>(value: Option<T>, field: &str) -> Result<T, HarnessError> {
    value.ok_or_else(|| HarnessError::Config(format!("problem.{field} is required for this experiment")))
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn build_schedule(chain: &ChainParams, n: usize, instance_seed: u64) -> Result<TransitionSchedule, HarnessError> {
    let graph = match chain.graph {
        GraphKind::Ring => Graph::ring(n, chain.self_loops)?,
        GraphKind::Path => Graph::path(n, chain.self_loops)?,
        GraphKind::Complete => Graph::complete(n, chain.self_loops)?,
        GraphKind::RingChords => {
            let offset = chain
                .chord_offset
                .ok_or_else(|| HarnessError::Config("chain.chord_offset is required for ring_chords".into()))?;
            let edges = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + offset) % n)]).filter(|(i, j)| i != j);
            Graph::undirected(n, edges, chain.self_loops)?
        }
        GraphKind::Model => return Err(HarnessError::Config("chain.graph = \"model\" needs a policy-evaluation model".into())),
    };
    let policy = match chain.walk {
        WalkKind::Simple => WalkPolicy::Simple,
        WalkKind::LazyMetropolis => {
            let target = match chain.target_weights {
                None => vec![1.0 / n as f64; n],
                Some([lo, hi]) => {
                    if !(lo > 0.0 && hi >= lo) {
                        return Err(HarnessError::Config(format!("target weights [{lo}, {hi}] must be positive")));
                    }
                    let mut rng = SeedStreams::new(instance_seed, 1).rng(Purpose::Instance);
                    let w: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(|v| v / s).collect()
                }
            };
            WalkPolicy::LazyMetropolis { target }
        }
    };
    Ok(build_random_walk(&graph, &policy)?)
}

/// Ring-coupled quadratic `Q = 2I − ½·(ring adjacency)`, spectrum in `[1, 3]`.
fn ring_quadratic(n: usize) -> Result<Quadratic, HarnessError> {
    let q = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0
        } else if n > 2 && ((i + 1) % n == j || (j + 1) % n == i) {
            -0.5
        } else {
            0.0
        }
    });
    Ok(make_quadratic(q, vec![0.0; n], BlockLayout::scalar(n))?)
}

/// `U diag(0, λ_1, …, λ_{n−1}) Uᵀ` with `λ` log-spaced over `range` and a
/// random orthogonal `U`, started at `U·1` so every eigen-direction carries
/// the same initial weight.
fn singular_quadratic(n: usize, range: [f64; 2], rng: &mut impl Rng) -> Result<(Quadratic, Vec<f64>), HarnessError> {
    let [lo, hi] = range;
    if !(lo > 0.0 && hi >= lo) || n < 3 {
        return Err(HarnessError::Config(format!("eigen_range [{lo}, {hi}] needs 0 < lo ≤ hi and size ≥ 3")));
    }
    let u = gaussian(n, n, rng).qr().q();
    let mut eig = vec![0.0];
    eig.extend((0..n - 1).map(|j| (lo.ln() + (hi.ln() - lo.ln()) * j as f64 / (n - 2) as f64).exp()));
    let q = &u * DMatrix::from_diagonal(&DVector::from_vec(eig)) * u.transpose();
    let q = (&q + q.transpose()) * 0.5;
    let x0 = (&u * DVector::from_element(n, 1.0)).as_slice().to_vec();
    Ok((make_quadratic(q, vec![0.0; n], BlockLayout::scalar(n))?, x0))
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let experiment = Experiment::from_name(&cfg.experiment)?;
        let p = &cfg.problem;
        let n = p.size;
        let mut rng = SeedStreams::new(p.instance_seed, 0).rng(Purpose::Instance);
        let model_chain = matches!(cfg.chain.graph, GraphKind::Model);
        if model_chain != (experiment == Experiment::DmdpEval) {
            return Err(HarnessError::Config("chain.graph = \"model\" is only valid for dmdp-eval".into()));
        }
        let (problem, x0, schedule) = match experiment {
            Experiment::QuadraticRing => {
                let x0 = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                (Problem::Quadratic(ring_quadratic(n)?), x0, build_schedule(&cfg.chain, n, p.instance_seed)?)
            }
            Experiment::QuadraticSingular => {
                let (q, x0) = singular_quadratic(n, need(p.eigen_range, "eigen_range")?, &mut rng)?;
                (Problem::Quadratic(q), x0, build_schedule(&cfg.chain, n, p.instance_seed)?)
            }
            Experiment::QuarticNonconvex => {
                let q = CoupledQuartic::new(n, need(p.cutoff, "cutoff")?, need(p.coupling, "coupling")?)?;
                let x0 = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
                (Problem::Quartic(q), x0, build_schedule(&cfg.chain, n, p.instance_seed)?)
            }
            Experiment::LassoMcpbcd => {
                let rows = need(p.dimension, "dimension")?;
                let m = gaussian(rows, n, &mut rng) / (rows as f64).sqrt();
                let mut x_true = vec![0.0; n];
                for v in x_true.iter_mut().step_by(10) {
                    *v = StandardNormal.sample(&mut rng);
                }
                let clean = &m * DVector::from_vec(x_true);
                let y: Vec<f64> = clean.iter().map(|v| v + 0.01 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
                let layout = BlockLayout::scalar(n);
                let penalty =
                    SeparableNonsmooth::uniform(ProxTerm::L1 { weight: need(p.l1_weight, "l1_weight")? }, layout.clone())?;
                let objective = LeastSquares::new(m, y, layout)?;
                (Problem::Lasso { objective, penalty }, vec![0.0; n], build_schedule(&cfg.chain, n, p.instance_seed)?)
            }
            Experiment::DmdpEval => {
                let model = DmdpModel::random(n, need(p.discount, "discount")?, &mut rng)?;
                let lambda = need(p.lambda, "lambda")?;
                let objective = DmdpObjective::new(model.clone(), lambda)?;
                let schedule = TransitionSchedule::from_matrix(model.transition().clone())?;
                let problem = Problem::Dmdp { model, objective, lambda, oracle_samples: p.oracle_samples };
                (problem, vec![0.0; n], schedule)
            }
            Experiment::MultiAgent => {
                let r = need(p.resources, "resources")?;
                let costs = (0..n)
                    .map(|_| AgentCost { curvature: rng.random_range(0.5..2.0), linear: rng.random_range(-2.0..-0.5) })
                    .collect();
                let a = DMatrix::from_fn(r, n, |_, _| rng.random_range(0.0..1.0));
                let obj = make_multi_agent(costs, a, vec![1.0; r], need(p.penalty, "penalty")?)?;
                (Problem::MultiAgent(obj), vec![0.0; n], build_schedule(&cfg.chain, n, p.instance_seed)?)
            }
            Experiment::Figure1EmpiricalDca => {
                let d = need(p.dimension, "dimension")?;
                let schedule = build_schedule(&cfg.chain, n, p.instance_seed)?;
                let pi = stationary_distribution(&schedule)?.pi;
                let total: f64 = pi.iter().sum();
                let masses = pi.into_iter().map(|v| v / total).collect();
                let samples = gaussian(d, n, &mut rng);
                let x: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                let losses = (0..n).map(|i| Loss::squared(samples.column(i).dot(&x))).collect();
                let problem = ErmDualProblem::new(samples, masses, need(p.lambda, "lambda")?, losses)?;
                let floor = default_floor(n, need(p.mass_ratio, "mass_ratio")?);
                (Problem::EmpiricalDca { problem, floor }, vec![0.0; n], schedule)
            }
        };
        let schedule = Arc::new(schedule);
        let obj = problem.objective();
        let s = obj.smoothness().clone();
        let lipschitz = match &problem {
            Problem::EmpiricalDca { problem, floor } => problem.lipschitz_with_floor(*floor),
            _ => s.block_lipschitz,
        };
        let f0 = obj.value(&x0) + problem.nonsmooth().map_or(0.0, |g| g.value(&x0));
        let pi_min = stationary_distribution(&schedule)?.pi_min;
        let envelope = matches!(
            experiment,
            Experiment::QuadraticRing | Experiment::QuadraticSingular | Experiment::QuarticNonconvex
        );
        let tau = if envelope { Some(internal_tau(&schedule, default_horizon(n))?.tau) } else { None };
        let radius = match (&problem, experiment, s.known_min) {
            (Problem::Quadratic(q), Experiment::QuadraticSingular, Some(m)) => Some(2.0 * q.level_set_radius(f0 - m)),
            _ => None,
        };
        let info = InstanceInfo {
            blocks: n,
            dim: obj.layout().dim(),
            block_lipschitz: s.block_lipschitz,
            full_lipschitz: s.full_lipschitz,
            step_size: cfg.solver.step_scale / lipschitz,
            f0,
            f_min: s.known_min,
            pi_min,
            tau,
            restricted_growth: s.restricted_growth,
            radius,
            frequency_floor: match &problem {
                Problem::EmpiricalDca { floor, .. } => Some(*floor),
                _ => None,
            },
        };
        Ok(Instance { experiment, schedule, problem, x0, info })
    }
}
