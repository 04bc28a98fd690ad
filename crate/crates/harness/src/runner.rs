//! Multi-seed execution and artifact output.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json          resolved config, versions, instance constants, per-seed status
//! config.toml            resolved config, loadable with `mcbcd run`
//! mean.csv               k,mean,sd,band of the experiment's primary metric
//! <name>.csv             secondary seed-averaged curves
//! envelope.json          envelope reports (envelope experiments only)
//! comm.json              token-walk message counts summed over seeds
//! summary.txt            human-readable outcome
//! seed_NNN/trace.csv     per-seed trace (and/or trace.jsonl), comm.json
//! ```
//!
//! Nothing in the directory depends on wall-clock time or the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mcbcd_core::analysis::{
    compare_envelope, envelope_linear, envelope_sublinear, fit_rate, log_grid, nonconvex_bound, objective_error_curve,
    rate_constants, running_min_grad_sq, EnvelopeKind, EnvelopeReport, FitKind, NoiseBudget, RateFit, SeedAverage,
    MIN_SEEDS,
};
use mcbcd_core::chain::WalkSampler;
use mcbcd_core::dca::{run_empirical_mcdca, sdca_baseline, FrequencyCounter};
use mcbcd_core::dmdp::{evaluate_policy_mcbcd, Selection, TransitionOracle};
use mcbcd_core::rng::{Purpose, SeedStreams};
use mcbcd_core::solver::{chain_sampler, run, InitialBlock, NoiseModel, RunError, SolverConfig, SolverError, Trace};
use rayon::prelude::*;
use serde::Serialize;

use crate::comm::CommStats;
use crate::config::{ExperimentConfig, TraceFormat};
use crate::error::HarnessError;
use crate::registry::{Experiment, Instance, InstanceInfo, Problem};

/// Execution knobs that never change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; the global pool when unset.
    pub workers: Option<usize>,
    /// Skip writing the output directory.
    pub dry: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub index: u64,
    pub status: String,
    pub iterations: usize,
    pub final_metric: Option<f64>,
    pub warnings: Vec<String>,
}

impl SeedReport {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub info: InstanceInfo,
    pub metric: &'static str,
    pub mean: SeedAverage,
    pub secondary: BTreeMap<String, SeedAverage>,
    pub envelopes: Vec<EnvelopeReport>,
    pub fit: Option<RateFit>,
    pub comm: Option<CommStats>,
    pub seeds: Vec<SeedReport>,
    pub notes: Vec<String>,
}

impl RunSummary {
    pub fn failed_seeds(&self) -> usize {
        self.seeds.iter().filter(|s| !s.ok()).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let ok = self.seeds.len() - self.failed_seeds();
        writeln!(s, "experiment: {}", self.config.experiment).unwrap();
        writeln!(s, "seeds: {ok}/{} completed (base seed {})", self.seeds.len(), self.config.seeds.base).unwrap();
        writeln!(s, "step size: {:?} (L = {:?}, L_r = {:?})", self.info.step_size, self.info.block_lipschitz, self.info.full_lipschitz)
            .unwrap();
        writeln!(s, "pi_min: {:?}", self.info.pi_min).unwrap();
        if let Some(tau) = self.info.tau {
            writeln!(s, "tau: {tau}").unwrap();
        }
        if let (Some(&k), Some(&m)) = (self.mean.k.last(), self.mean.mean.last()) {
            writeln!(s, "final mean {} at k = {k}: {m:?}", self.metric).unwrap();
        }
        for r in &self.envelopes {
            writeln!(s, "envelope {}", r.summary()).unwrap();
        }
        if let Some(fit) = &self.fit {
            writeln!(s, "rate fit: slope {:?}, r^2 {:?} over {} points", fit.slope, fit.r_squared, fit.points).unwrap();
        }
        if let Some(c) = &self.comm {
            writeln!(s, "messages: {} token hand-offs vs {} all-reduce equivalent", c.messages, c.allreduce_equivalent)
                .unwrap();
        }
        for n in &self.notes {
            writeln!(s, "note: {n}").unwrap();
        }
        for seed in self.seeds.iter().filter(|s| !s.ok()) {
            writeln!(s, "seed {} failed: {}", seed.index, seed.status).unwrap();
        }
        s
    }
}

/// Name of the primary per-seed curve.
pub fn metric_name(e: Experiment) -> &'static str {
    match e {
        Experiment::QuadraticRing | Experiment::QuadraticSingular => "objective_error",
        Experiment::QuarticNonconvex => "min_grad_sq",
        Experiment::LassoMcpbcd => "composite_objective",
        Experiment::DmdpEval => "bellman_residual",
        Experiment::MultiAgent => "objective",
        Experiment::Figure1EmpiricalDca => "duality_gap",
    }
}

/// Primary metric curve of one trace.
pub fn metric_curve(inst: &Instance, trace: &Trace) -> Vec<(usize, f64)> {
    let extra = |key: &str| -> Vec<(usize, f64)> {
        trace.records.iter().map(|r| (r.k, r.extra.get(key).copied().unwrap_or(f64::NAN))).collect()
    };
    match inst.experiment {
        Experiment::QuadraticRing | Experiment::QuadraticSingular => {
            objective_error_curve(trace, inst.info.f_min.unwrap_or(0.0))
        }
        Experiment::QuarticNonconvex => running_min_grad_sq(trace),
        Experiment::LassoMcpbcd | Experiment::MultiAgent => trace.records.iter().map(|r| (r.k, r.f_value)).collect(),
        Experiment::DmdpEval => extra("bellman_residual"),
        Experiment::Figure1EmpiricalDca => extra("duality_gap"),
    }
}

pub fn solver_config(inst: &Instance, cfg: &ExperimentConfig) -> SolverConfig {
    let mut s = SolverConfig::new(inst.info.step_size, cfg.solver.max_iters);
    s.noise = cfg.solver.noise.model();
    s.stop = cfg.solver.stop;
    s.record_every = cfg.solver.record_every;
    s.initial_point = Some(inst.x0.clone());
    s
}

/// Checkpoints of the SDCA baseline curve.
pub fn baseline_grid(max_iters: usize) -> Vec<usize> {
    if max_iters < 10 {
        return if max_iters == 0 { vec![] } else { vec![max_iters] };
    }
    log_grid(10, max_iters, 13)
}

/// SDCA after `k` i.i.d. iterations with masses estimated from the first
/// `k` states of an independent walk, for each `k` in the grid.
fn sdca_curve(inst: &Instance, cfg: &ExperimentConfig, streams: SeedStreams) -> Result<Vec<(usize, f64)>, RunError> {
    let Problem::EmpiricalDca { problem, floor } = &inst.problem else { unreachable!() };
    let mut walk = WalkSampler::from_distribution(inst.schedule.clone(), problem.masses(), streams.rng(Purpose::Estimation));
    let mut counter = FrequencyCounter::new(problem.sample_count(), *floor).map_err(RunError::Invalid)?;
    counter.observe(walk.current_state());
    let mut out = Vec::new();
    for k in baseline_grid(cfg.solver.max_iters) {
        while (counter.total() as usize) < k {
            counter.observe(walk.next_state());
        }
        let mut sc = solver_config(inst, cfg);
        sc.max_iters = k;
        sc.record_every = k;
        sc.noise = NoiseModel::None;
        sc.stop = mcbcd_core::solver::StopRule::IterCap;
        let trace = sdca_baseline(problem, counter.estimates(), sc, streams)?;
        out.push((k, trace.last().extra["duality_gap"]));
    }
    Ok(out)
}

/// Relative objective error below which iterates sit at roundoff.
const ROUNDOFF_FLOOR: f64 = 1e-12;

/// One replica's trace; `store_iterates` is for audits.
pub fn run_seed(inst: &Instance, cfg: &ExperimentConfig, index: u64, store_iterates: bool) -> Result<Trace, RunError> {
    let streams = SeedStreams::new(cfg.seeds.base, index);
    let mut sc = solver_config(inst, cfg);
    sc.store_iterates = store_iterates;
    let schedule = inst.schedule.clone();
    match &inst.problem {
        Problem::Dmdp { model, lambda, oracle_samples, .. } => {
            let mut oracle = match oracle_samples {
                None => TransitionOracle::exact(model),
                Some(m) => TransitionOracle::monte_carlo(model, *m, streams.rng(Purpose::Oracle), None)
                    .map_err(|e| RunError::Invalid(SolverError::Oracle { k: 0, reason: e.to_string() }))?,
            };
            evaluate_policy_mcbcd(model, &mut oracle, Selection::Chain(schedule), *lambda, sc, streams).map(|r| r.1)
        }
        Problem::EmpiricalDca { problem, floor } => {
            run_empirical_mcdca(problem, schedule, *floor, sc, streams).map(|r| r.0)
        }
        p => run(p.objective(), p.nonsmooth(), schedule, sc, streams),
    }
}

struct SeedOutput {
    report: SeedReport,
    curve: Option<Vec<(usize, f64)>>,
    secondary: BTreeMap<String, Vec<(usize, f64)>>,
    comm: Option<CommStats>,
}

fn token_path(inst: &Instance, cfg: &ExperimentConfig, index: u64, trace: &Trace) -> Vec<usize> {
    let streams = SeedStreams::new(cfg.seeds.base, index);
    let (mut walk, _) = chain_sampler(inst.schedule.clone(), streams, InitialBlock::Stationary).expect("run succeeded");
    let mut path = vec![walk.current_state()];
    for _ in 0..trace.iterations() {
        path.push(walk.next_state());
    }
    debug_assert!(trace.blocks().zip(&path).all(|(a, &b)| a == b));
    path
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn seed_dir(dir: &Path, index: u64) -> PathBuf {
    dir.join(format!("seed_{index:03}"))
}

fn execute_seed(inst: &Instance, cfg: &ExperimentConfig, index: u64, dir: Option<&Path>) -> Result<SeedOutput, HarnessError> {
    let (trace, status) = match run_seed(inst, cfg, index, false) {
        Ok(t) => (Some(t), "ok".to_string()),
        Err(RunError::Aborted { error, partial }) => (Some(*partial), format!("aborted: {error}")),
        Err(RunError::Invalid(e)) => (None, format!("invalid: {e}")),
    };
    let ok = status == "ok";
    let mut secondary = BTreeMap::new();
    let mut curve = None;
    let mut comm = None;
    if let (Some(t), true) = (&trace, ok) {
        let c = metric_curve(inst, t);
        if inst.experiment == Experiment::Figure1EmpiricalDca {
            secondary.insert("min_grad_sq".to_string(), running_min_grad_sq(t));
            let streams = SeedStreams::new(cfg.seeds.base, index);
            match sdca_curve(inst, cfg, streams) {
                Ok(b) => {
                    secondary.insert("sdca_gap".to_string(), b);
                }
                Err(e) => return Err(HarnessError::Solver(e.error().clone())),
            }
        }
        comm = Some(CommStats::from_path(inst.info.blocks, &token_path(inst, cfg, index, t)));
        curve = Some(c);
    }
    let report = SeedReport {
        index,
        status,
        iterations: trace.as_ref().map_or(0, |t| t.iterations()),
        final_metric: curve.as_ref().and_then(|c| c.last().map(|p| p.1)),
        warnings: trace.as_ref().map_or_else(Vec::new, |t| t.warnings.clone()),
    };
    if let (Some(dir), Some(t)) = (dir, &trace) {
        let sd = seed_dir(dir, index);
        std::fs::create_dir_all(&sd).map_err(|e| HarnessError::io(&sd, e))?;
        for f in &cfg.output.formats {
            match f {
                TraceFormat::Csv => write(&sd.join("trace.csv"), t.to_csv())?,
                TraceFormat::Jsonl => write(&sd.join("trace.jsonl"), t.to_jsonl())?,
            }
        }
        if let Some(c) = &comm {
            write(&sd.join("comm.json"), json(c))?;
        }
    }
    Ok(SeedOutput { report, curve, secondary, comm })
}

/// Puts every curve on the union of their k-grids. A curve is held at its
/// last value past its end: a stopped run keeps its final iterate.
pub fn align_curves(curves: &[Vec<(usize, f64)>]) -> Vec<Vec<(usize, f64)>> {
    let mut grid: Vec<usize> = curves.iter().flat_map(|c| c.iter().map(|p| p.0)).collect();
    grid.sort_unstable();
    grid.dedup();
    curves
        .iter()
        .map(|c| {
            if c.is_empty() {
                return Vec::new();
            }
            let mut j = 0;
            grid.iter()
                .map(|&k| {
                    while j + 1 < c.len() && c[j + 1].0 <= k {
                        j += 1;
                    }
                    (k, c[j].1)
                })
                .collect()
        })
        .collect()
}

fn average(curves: &[Vec<(usize, f64)>]) -> Result<SeedAverage, HarnessError> {
    if curves.is_empty() {
        return Ok(SeedAverage { k: vec![], mean: vec![], sd: vec![], band: vec![], seeds: 0 });
    }
    Ok(SeedAverage::from_curves(&align_curves(curves))?)
}

fn average_csv(avg: &SeedAverage) -> String {
    let mut s = String::from("k,mean,sd,band\n");
    for i in 0..avg.k.len() {
        writeln!(s, "{},{:?},{:?},{:?}", avg.k[i], avg.mean[i], avg.sd[i], avg.band[i]).unwrap();
    }
    s
}

fn envelopes(
    inst: &Instance,
    cfg: &ExperimentConfig,
    mean: &SeedAverage,
    notes: &mut Vec<String>,
) -> Result<(Vec<EnvelopeReport>, Option<RateFit>), HarnessError> {
    let info = &inst.info;
    let Some(tau) = info.tau else { return Ok((vec![], None)) };
    if mean.k.is_empty() {
        return Ok((vec![], None));
    }
    let c = rate_constants(info.step_size, info.block_lipschitz, info.full_lipschitz, tau, info.pi_min)?;
    let f_gap = info.f0 - info.f_min.unwrap_or(0.0);
    let max_k = *mean.k.last().unwrap();
    let mut reports = Vec::new();
    let mut fit = None;
    match inst.experiment {
        Experiment::QuadraticRing => {
            let nu = info.restricted_growth.ok_or_else(|| HarnessError::Config("no restricted growth".into()))?;
            let env = envelope_linear(f_gap, c.c_tau, nu, tau, &mean.k);
            let mut r = compare_envelope(EnvelopeKind::Linear, mean, &env.bound)?;
            r.warnings.extend(env.warning);
            reports.push(r);
            let floor = ROUNDOFF_FLOOR * f_gap;
            let last = mean.points().into_iter().take_while(|&(_, v)| v > floor).last().map_or(0, |p| p.0);
            if last >= 2 {
                fit = Some(fit_rate(&mean.points(), 1..=last, FitKind::SemiLog)?);
            }
        }
        Experiment::QuadraticSingular => {
            let radius = info.radius.ok_or_else(|| HarnessError::Config("no level-set diameter".into()))?;
            let bound = envelope_sublinear(f_gap, c.c_tau, radius, tau, &mean.k);
            reports.push(compare_envelope(EnvelopeKind::Sublinear, mean, &bound)?);
            if max_k >= 1000 {
                fit = Some(fit_rate(&mean.points(), 100..=max_k.min(10_000), FitKind::LogLog)?);
            }
        }
        Experiment::QuarticNonconvex => {
            if mean.seeds < MIN_SEEDS {
                notes.push(format!("nonconvex envelope skipped: {} seeds, need {MIN_SEEDS}", mean.seeds));
                return Ok((vec![], None));
            }
            let model = cfg.solver.noise.model();
            let noise = match model {
                NoiseModel::Bounded { level } => NoiseBudget::Bounded { level },
                m => NoiseBudget::SquareSummable { energy: m.total_energy().expect("closed form") },
            };
            let (kind, bound) = nonconvex_bound(&c, f_gap, noise, &mean.k);
            reports.push(compare_envelope(kind, mean, &bound)?);
        }
        _ => {}
    }
    Ok((reports, fit))
}

fn prepare_dir(dir: &Path) -> Result<(), HarnessError> {
    if dir.exists() {
        let mut entries = std::fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
        if entries.next().is_some() {
            if !dir.join("manifest.json").exists() {
                return Err(HarnessError::Config(format!(
                    "output directory {} is not empty and holds no previous run",
                    dir.display()
                )));
            }
            std::fs::remove_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    versions: BTreeMap<&'static str, &'static str>,
    config: &'a ExperimentConfig,
    instance: &'a InstanceInfo,
    metric: &'static str,
    seeds: &'a [SeedReport],
}

pub fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every seed of `cfg` and, unless `opts.dry`, writes the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let inst = Instance::build(cfg)?;
    let dir = (!opts.dry).then_some(cfg.output.dir.as_path());
    if let Some(d) = dir {
        prepare_dir(d)?;
    }
    let outputs: Vec<SeedOutput> = with_pool(opts.workers, || {
        (0..cfg.seeds.count as u64)
            .into_par_iter()
            .map(|i| execute_seed(&inst, cfg, i, dir))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let curves: Vec<_> = outputs.iter().filter_map(|o| o.curve.clone()).collect();
    let mean = average(&curves)?;
    let mut secondary = BTreeMap::new();
    let keys: Vec<String> = outputs.iter().flat_map(|o| o.secondary.keys().cloned()).collect();
    for key in keys {
        if secondary.contains_key(&key) {
            continue;
        }
        let cs: Vec<_> = outputs.iter().filter_map(|o| o.secondary.get(&key).cloned()).collect();
        secondary.insert(key, average(&cs)?);
    }
    let mut notes = Vec::new();
    let (envelope_reports, fit) = envelopes(&inst, cfg, &mean, &mut notes)?;
    for r in &envelope_reports {
        notes.extend(r.warnings.iter().cloned());
    }
    let comm_parts: Vec<CommStats> = outputs.iter().filter_map(|o| o.comm.clone()).collect();
    let summary = RunSummary {
        config: cfg.clone(),
        info: inst.info.clone(),
        metric: metric_name(inst.experiment),
        mean,
        secondary,
        envelopes: envelope_reports,
        fit,
        comm: CommStats::combine(&comm_parts),
        seeds: outputs.into_iter().map(|o| o.report).collect(),
        notes,
    };
    if let Some(d) = dir {
        let mut versions = BTreeMap::new();
        versions.insert("mcbcd-harness", env!("CARGO_PKG_VERSION"));
        let manifest = Manifest {
            experiment: &cfg.experiment,
            versions,
            config: cfg,
            instance: &summary.info,
            metric: summary.metric,
            seeds: &summary.seeds,
        };
        write(&d.join("manifest.json"), json(&manifest))?;
        write(&d.join("config.toml"), cfg.to_toml())?;
        write(&d.join("mean.csv"), average_csv(&summary.mean))?;
        for (name, avg) in &summary.secondary {
            write(&d.join(format!("{name}.csv")), average_csv(avg))?;
        }
        if !summary.envelopes.is_empty() {
            write(&d.join("envelope.json"), json(&summary.envelopes))?;
        }
        if let Some(c) = &summary.comm {
            write(&d.join("comm.json"), json(c))?;
        }
        write(&d.join("summary.txt"), summary.to_text())?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn align_holds_last_value() {
        let a = vec![(0, 4.0), (10, 2.0), (20, 1.0)];
        let b = vec![(0, 3.0), (10, 0.5), (15, 0.25)];
        let out = align_curves(&[a, b]);
        assert_eq!(out[0], vec![(0, 4.0), (10, 2.0), (15, 2.0), (20, 1.0)]);
        assert_eq!(out[1], vec![(0, 3.0), (10, 0.5), (15, 0.25), (20, 0.25)]);
    }

    #[test]
    fn baseline_grid_ends_at_cap() {
        assert_eq!(baseline_grid(0), Vec::<usize>::new());
        assert_eq!(baseline_grid(5), vec![5]);
        let g = baseline_grid(10_000);
        assert_eq!((g[0], *g.last().unwrap()), (10, 10_000));
    }
}
