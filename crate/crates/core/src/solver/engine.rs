use std::collections::BTreeMap;
use std::sync::Arc;

use super::noise::{ModelNoise, Perturbation};
use super::trace::{CacheAudit, StepInfo, StopReason, Trace, TraceRecord};
use super::{prox_grad_residual, InitialBlock, RunError, SolverConfig, SolverError, StopRule};
use crate::chain::{stationary_distribution, TransitionSchedule, WalkSampler};
use crate::linalg::norm;
use crate::objective::{BlockObjective, ResidualCache, SeparableNonsmooth};
use crate::rng::{Purpose, SeedStreams};
use crate::select::BlockSelector;

/// `x^k` with its iteration counter, previous block and residual cache.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub k: usize,
    pub last_block: Option<usize>,
    pub cache: Option<ResidualCache>,
}

impl IterateState {
    pub fn new(obj: &dyn BlockObjective, x0: Vec<f64>) -> Result<Self, SolverError> {
        let dim = obj.layout().dim();
        if x0.len() != dim {
            return Err(SolverError::Dimension(format!("initial point has {} entries, expected {dim}", x0.len())));
        }
        let cache = obj.init_cache(&x0);
        Ok(Self { x: x0, k: 0, last_block: None, cache })
    }
}

/// What a [`Perturbation`] sees when asked for `ε^k`.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub k: usize,
    pub block: usize,
    pub x: &'a [f64],
    pub cache: Option<&'a ResidualCache>,
    /// Exact `∇_{block} f(x^k)`.
    pub gradient: &'a [f64],
}

fn apply_step(
    obj: &dyn BlockObjective,
    nonsmooth: Option<&SeparableNonsmooth>,
    state: &mut IterateState,
    block: usize,
    gamma: f64,
    perturbation: &mut dyn Perturbation,
) -> Result<StepInfo, SolverError> {
    let layout = obj.layout();
    let count = layout.block_count();
    if block >= count {
        return Err(SolverError::BlockOutOfRange { block, count });
    }
    let k = state.k;
    let grad = obj.block_gradient_cached(&state.x, state.cache.as_ref(), block);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(SolverError::NonFiniteGradient { k, block });
    }
    let ctx = StepContext { k, block, x: &state.x, cache: state.cache.as_ref(), gradient: &grad };
    let noise = perturbation.perturb(&ctx)?;
    if let Some(e) = &noise {
        if e.len() != grad.len() {
            return Err(SolverError::Dimension(format!("noise has {} entries for block of {}", e.len(), grad.len())));
        }
        if e.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteNoise { k, block });
        }
    }
    let range = layout.range(block);
    let mut next: Vec<f64> = range
        .clone()
        .enumerate()
        .map(|(t, j)| state.x[j] - gamma * (grad[t] + noise.as_ref().map_or(0.0, |e| e[t])))
        .collect();
    if let Some(g) = nonsmooth {
        next = g.prox_block(block, &next, gamma);
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteGradient { k, block });
    }
    let delta: Vec<f64> = range.clone().zip(&next).map(|(j, v)| v - state.x[j]).collect();
    state.x[range].copy_from_slice(&next);
    if let Some(cache) = state.cache.as_mut() {
        obj.update_cache(cache, block, &delta);
    }
    state.k += 1;
    state.last_block = Some(block);
    Ok(StepInfo {
        block,
        step_norm_sq: delta.iter().map(|d| d * d).sum(),
        noise_norm_sq: noise.map_or(0.0, |e| e.iter().map(|v| v * v).sum()),
    })
}

/// One smooth step: draw `i_k` from `selector` and update that block.
pub fn mcbcd_step(
    obj: &dyn BlockObjective,
    state: &mut IterateState,
    selector: &mut dyn BlockSelector,
    gamma: f64,
    perturbation: &mut dyn Perturbation,
) -> Result<StepInfo, SolverError> {
    let block = selector.next_block();
    apply_step(obj, None, state, block, gamma, perturbation)
}

/// One proximal step on `f + g`.
pub fn mcpbcd_step(
    obj: &dyn BlockObjective,
    g: &SeparableNonsmooth,
    state: &mut IterateState,
    selector: &mut dyn BlockSelector,
    gamma: f64,
    perturbation: &mut dyn Perturbation,
) -> Result<StepInfo, SolverError> {
    let block = selector.next_block();
    apply_step(obj, Some(g), state, block, gamma, perturbation)
}

type MetricsFn<'a> = dyn Fn(&[f64]) -> Vec<(String, f64)> + Send + Sync + 'a;

/// A configured run of the iteration on one objective.
pub struct Solver<'a> {
    obj: &'a dyn BlockObjective,
    nonsmooth: Option<&'a SeparableNonsmooth>,
    metrics: Option<Box<MetricsFn<'a>>>,
    cfg: SolverConfig,
}

impl<'a> Solver<'a> {
    pub fn new(obj: &'a dyn BlockObjective, cfg: SolverConfig) -> Self {
        Self { obj, nonsmooth: None, metrics: None, cfg }
    }

    pub fn with_nonsmooth(mut self, g: &'a SeparableNonsmooth) -> Self {
        self.nonsmooth = Some(g);
        self
    }

    /// Extra per-record metrics, evaluated at each recorded iterate.
    pub fn with_metrics(mut self, f: impl Fn(&[f64]) -> Vec<(String, f64)> + Send + Sync + 'a) -> Self {
        self.metrics = Some(Box::new(f));
        self
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn validate(&self) -> Result<(), SolverError> {
        let proximal = self.nonsmooth.is_some_and(|g| !g.is_zero());
        self.cfg.validate(self.obj.smoothness(), proximal)?;
        if let Some(g) = self.nonsmooth {
            if g.layout() != self.obj.layout() {
                return Err(SolverError::Dimension("nonsmooth term uses a different block layout".into()));
            }
        }
        if let StopRule::ObjectiveGap { .. } = self.cfg.stop {
            if self.obj.lower_bound().is_none() {
                return Err(SolverError::Config("objective-gap stop needs a known lower bound".into()));
            }
        }
        Ok(())
    }

    fn record(&self, state: &IterateState, last: Option<&StepInfo>) -> TraceRecord {
        let x = &state.x;
        let grad = self.obj.gradient(x);
        let mut f_value = self.obj.value(x);
        let mut extra = BTreeMap::new();
        if let Some(g) = self.nonsmooth {
            f_value += g.value(x);
            extra.insert(
                "prox_residual".to_string(),
                prox_grad_residual(self.obj, g, x, self.cfg.step_size),
            );
        }
        if let Some(m) = &self.metrics {
            extra.extend(m(x));
        }
        TraceRecord {
            k: state.k,
            block: last.map(|s| s.block),
            f_value,
            grad_norm: norm(&grad),
            step_norm: last.map_or(0.0, |s| s.step_norm_sq.sqrt()),
            noise_norm: last.map_or(0.0, |s| s.noise_norm_sq.sqrt()),
            extra,
        }
    }

    fn should_stop(&self, r: &TraceRecord) -> Option<StopReason> {
        match self.cfg.stop {
            StopRule::IterCap => None,
            StopRule::GradNorm { tol } => (r.grad_norm <= tol).then_some(StopReason::GradNorm),
            StopRule::ObjectiveGap { tol } => {
                let lb = self.obj.lower_bound().expect("validated");
                (r.f_value - lb <= tol).then_some(StopReason::ObjectiveGap)
            }
        }
    }

    /// Iterate with an arbitrary block sequence and error source.
    pub fn run_with_selector(
        &self,
        selector: &mut dyn BlockSelector,
        perturbation: &mut dyn Perturbation,
    ) -> Result<Trace, RunError> {
        self.validate().map_err(RunError::Invalid)?;
        let n = self.obj.layout().block_count();
        if selector.block_count() != n {
            return Err(RunError::Invalid(SolverError::Dimension(format!(
                "selector covers {} blocks, objective has {n}",
                selector.block_count()
            ))));
        }
        let x0 = self.cfg.initial_point.clone().unwrap_or_else(|| vec![0.0; self.obj.layout().dim()]);
        let mut state = IterateState::new(self.obj, x0).map_err(RunError::Invalid)?;
        let mut trace = Trace {
            records: vec![self.record(&state, None)],
            steps: Vec::with_capacity(self.cfg.max_iters.min(1 << 24)),
            iterates: self.cfg.store_iterates.then(|| vec![state.x.clone()]),
            final_x: Vec::new(),
            cache_audits: Vec::new(),
            stop_reason: StopReason::IterCap,
            warnings: Vec::new(),
            step_size: self.cfg.step_size,
            proximal: self.nonsmooth.is_some(),
        };
        if let Some(reason) = self.should_stop(trace.initial()) {
            trace.stop_reason = reason;
            trace.final_x = state.x;
            return Ok(trace);
        }
        let gamma = self.cfg.step_size;
        while state.k < self.cfg.max_iters {
            let block = selector.next_block();
            let info = match apply_step(self.obj, self.nonsmooth, &mut state, block, gamma, perturbation) {
                Ok(info) => info,
                Err(error) => {
                    trace.stop_reason = StopReason::Aborted;
                    trace.final_x = state.x;
                    return Err(RunError::Aborted { error, partial: Box::new(trace) });
                }
            };
            trace.steps.push(info);
            if let Some(its) = trace.iterates.as_mut() {
                its.push(state.x.clone());
            }
            if self.cfg.audit_every > 0 && state.k % self.cfg.audit_every == 0 {
                if let Some(cache) = state.cache.as_mut() {
                    let fresh = self.obj.init_cache(&state.x).expect("objective keeps a cache");
                    let scale = fresh.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    let diff = cache
                        .values
                        .iter()
                        .zip(&fresh.values)
                        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                    trace.cache_audits.push(CacheAudit { k: state.k, drift: diff / (1.0 + scale) });
                    *cache = fresh;
                }
            }
            if state.k % self.cfg.record_every == 0 || state.k == self.cfg.max_iters {
                let r = self.record(&state, Some(&info));
                let stop = self.should_stop(&r);
                trace.records.push(r);
                if let Some(reason) = stop {
                    trace.stop_reason = reason;
                    break;
                }
            }
        }
        trace.final_x = state.x;
        Ok(trace)
    }

    /// Iterate along a walk on `schedule` with noise from the configured model.
    pub fn run_chain(&self, schedule: Arc<TransitionSchedule>, streams: SeedStreams) -> Result<Trace, RunError> {
        let mut noise = ModelNoise::new(self.cfg.noise.clone(), streams.rng(Purpose::Noise));
        self.run_chain_with(schedule, streams, &mut noise)
    }

    /// Iterate along a walk on `schedule` with a caller-supplied error source.
    pub fn run_chain_with(
        &self,
        schedule: Arc<TransitionSchedule>,
        streams: SeedStreams,
        perturbation: &mut dyn Perturbation,
    ) -> Result<Trace, RunError> {
        let (mut sampler, mut warnings) =
            chain_sampler(schedule, streams, self.cfg.initial_block).map_err(RunError::Invalid)?;
        let mut trace = self.run_with_selector(&mut sampler, perturbation)?;
        warnings.append(&mut trace.warnings);
        trace.warnings = warnings;
        Ok(trace)
    }
}

/// The walk used by [`Solver::run_chain`]: it starts from a draw of `π*`
/// (uniform, with a warning, when `π*` cannot be computed) or a fixed block,
/// on the seed's selection stream.
pub fn chain_sampler(
    schedule: Arc<TransitionSchedule>,
    streams: SeedStreams,
    initial_block: InitialBlock,
) -> Result<(WalkSampler, Vec<String>), SolverError> {
    let mut warnings = Vec::new();
    let n = schedule.state_count();
    let rng = streams.rng(Purpose::Selection);
    let sampler = match initial_block {
        InitialBlock::Stationary => {
            let pi = match stationary_distribution(&schedule) {
                Ok(s) => s.pi,
                Err(e) => {
                    warnings.push(format!("chain may not mix: {e}"));
                    vec![1.0 / n as f64; n]
                }
            };
            WalkSampler::from_distribution(schedule, &pi, rng)
        }
        InitialBlock::Fixed(i) if i < n => WalkSampler::new(schedule, i, rng),
        InitialBlock::Fixed(i) => return Err(SolverError::BlockOutOfRange { block: i, count: n }),
    };
    Ok((sampler, warnings))
}

/// Run MC-BCD (or MC-PBCD when `g` is given) along a walk on `schedule`.
pub fn run(
    obj: &dyn BlockObjective,
    g: Option<&SeparableNonsmooth>,
    schedule: Arc<TransitionSchedule>,
    cfg: SolverConfig,
    streams: SeedStreams,
) -> Result<Trace, RunError> {
    let mut solver = Solver::new(obj, cfg);
    if let Some(g) = g {
        solver = solver.with_nonsmooth(g);
    }
    solver.run_chain(schedule, streams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_random_walk, Graph, WalkPolicy};
    use crate::objective::{make_quadratic, BlockLayout, ProxTerm, Quadratic};
    use crate::select::ReplaySelector;
    use crate::solver::{pathwise_audit, NoPerturbation, NoiseModel};
    use crate::{DMatrix, DVector};

    fn half_square(n: usize) -> Quadratic {
        make_quadratic(DMatrix::identity(n, n), vec![0.0; n], BlockLayout::scalar(n)).unwrap()
    }

    fn ring_quadratic(n: usize) -> Quadratic {
        let mut q = DMatrix::identity(n, n) * 2.0;
        for i in 0..n {
            q[(i, (i + 1) % n)] -= 0.5;
            q[((i + 1) % n, i)] -= 0.5;
        }
        let c = (0..n).map(|i| (i as f64).cos()).collect();
        make_quadratic(q, c, BlockLayout::scalar(n)).unwrap()
    }

    fn ring_walk(n: usize) -> Arc<TransitionSchedule> {
        Arc::new(build_random_walk(&Graph::ring(n, true).unwrap(), &WalkPolicy::Simple).unwrap())
    }

    #[test]
    fn exact_coordinate_minimization() {
        let f = half_square(2);
        let mut state = IterateState::new(&f, vec![1.0, 1.0]).unwrap();
        let mut sel = ReplaySelector::new(vec![0], 2);
        let info = mcbcd_step(&f, &mut state, &mut sel, 1.0, &mut NoPerturbation).unwrap();
        assert_eq!(state.x, vec![0.0, 1.0]);
        assert_eq!(info.step_norm_sq, 1.0);
        assert_eq!(state.last_block, Some(0));
    }

    #[test]
    fn soft_threshold_step() {
        let f = half_square(1);
        let g = SeparableNonsmooth::uniform(ProxTerm::L1 { weight: 1.0 }, BlockLayout::scalar(1)).unwrap();
        let mut state = IterateState::new(&f, vec![2.0]).unwrap();
        mcpbcd_step(&f, &g, &mut state, &mut ReplaySelector::new(vec![0], 1), 0.5, &mut NoPerturbation).unwrap();
        assert_eq!(state.x, vec![0.5]);
    }

    #[test]
    fn zero_prox_matches_smooth_step() {
        let f = ring_quadratic(5);
        let g = SeparableNonsmooth::uniform(ProxTerm::Zero, BlockLayout::scalar(5)).unwrap();
        let x0 = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let (mut a, mut b) = (IterateState::new(&f, x0.clone()).unwrap(), IterateState::new(&f, x0).unwrap());
        let blocks = vec![3, 1, 4, 0, 2, 2, 1];
        let (mut sa, mut sb) = (ReplaySelector::new(blocks.clone(), 5), ReplaySelector::new(blocks, 5));
        for _ in 0..7 {
            mcbcd_step(&f, &mut a, &mut sa, 0.4, &mut NoPerturbation).unwrap();
            mcpbcd_step(&f, &g, &mut b, &mut sb, 0.4, &mut NoPerturbation).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn empty_run() {
        let f = ring_quadratic(4);
        let trace = run(&f, None, ring_walk(4), SolverConfig::new(0.5, 0), SeedStreams::new(1, 0)).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert!(trace.steps.is_empty());
        assert_eq!(trace.initial().block, None);
    }

    #[test]
    fn deterministic_given_seed() {
        let f = ring_quadratic(6);
        let mut cfg = SolverConfig::new(0.5, 500);
        cfg.noise = NoiseModel::Bounded { level: 1e-3 };
        let a = run(&f, None, ring_walk(6), cfg.clone(), SeedStreams::new(7, 3)).unwrap();
        let b = run(&f, None, ring_walk(6), cfg.clone(), SeedStreams::new(7, 3)).unwrap();
        let c = run(&f, None, ring_walk(6), cfg, SeedStreams::new(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a.steps, c.steps);
    }

    #[test]
    fn converges_to_direct_solve() {
        let n = 20;
        let f = ring_quadratic(n);
        let mut cfg = SolverConfig::new(1.0 / f.smoothness().block_lipschitz, 10_000);
        cfg.record_every = 100;
        let trace = run(&f, None, ring_walk(n), cfg, SeedStreams::new(3, 0)).unwrap();
        assert!(trace.last().grad_norm < 1e-6);
        let direct = f
            .hessian()
            .clone()
            .lu()
            .solve(&(-f.linear_term()))
            .unwrap();
        let err = (DVector::from_vec(trace.final_x.clone()) - direct).amax();
        assert!(err < 1e-6, "{err}");
        for w in trace.records.windows(2) {
            assert!(w[1].k > w[0].k);
            assert!(w[1].f_value <= w[0].f_value + 1e-14 * (1.0 + w[0].f_value.abs()));
        }
        assert!(trace.max_cache_drift() < 1e-8);
    }

    #[test]
    fn single_block_changes_and_audits() {
        let f = ring_quadratic(6);
        for noise in [NoiseModel::None, NoiseModel::Bounded { level: 1e-2 }, NoiseModel::SquareSummable { sigma0: 0.1 }] {
            for scale in [0.5, 1.0, 1.9] {
                let mut cfg = SolverConfig::new(scale / f.smoothness().block_lipschitz, 300);
                cfg.noise = noise.clone();
                cfg.store_iterates = true;
                cfg.initial_point = Some(vec![1.0, -1.0, 2.0, 0.0, 0.5, -0.5]);
                let trace = run(&f, None, ring_walk(6), cfg, SeedStreams::new(11, 0)).unwrap();
                let its = trace.iterates.as_ref().unwrap();
                for (k, s) in trace.steps.iter().enumerate() {
                    for j in 0..6 {
                        if j != s.block {
                            assert_eq!(its[k][j], its[k + 1][j]);
                        }
                    }
                }
                // the simple ring walk on 6 nodes needs a few steps to mix
                for tau in [1, 3, 8] {
                    assert!(pathwise_audit(&trace, &f, tau).unwrap().passed());
                }
            }
        }
    }

    #[test]
    fn rejects_large_steps() {
        let f = ring_quadratic(4);
        let err = run(&f, None, ring_walk(4), SolverConfig::new(2.0, 10), SeedStreams::new(0, 0)).unwrap_err();
        assert!(matches!(err.error(), SolverError::InvalidStepSize { .. }));
        let g = SeparableNonsmooth::uniform(ProxTerm::L1 { weight: 1.0 }, BlockLayout::scalar(4)).unwrap();
        let err = run(&f, Some(&g), ring_walk(4), SolverConfig::new(0.6, 10), SeedStreams::new(0, 0)).unwrap_err();
        assert!(matches!(err.error(), SolverError::InvalidStepSize { .. }));
    }

    #[test]
    fn non_finite_gradient_aborts_with_partial_trace() {
        let f = ring_quadratic(3);
        let mut cfg = SolverConfig::new(0.5, 100);
        cfg.noise = NoiseModel::Custom(Arc::new(|k, dim, _| vec![if k == 5 { f64::NAN } else { 0.0 }; dim]));
        match run(&f, None, ring_walk(3), cfg, SeedStreams::new(0, 0)).unwrap_err() {
            RunError::Aborted { error, partial } => {
                assert_eq!(error, SolverError::NonFiniteNoise { k: 5, block: error_block(&error) });
                assert_eq!(partial.iterations(), 5);
                assert_eq!(partial.stop_reason, StopReason::Aborted);
            }
            other => panic!("{other}"),
        }
    }

    fn error_block(e: &SolverError) -> usize {
        match e {
            SolverError::NonFiniteNoise { block, .. } => *block,
            _ => usize::MAX,
        }
    }

    #[test]
    fn gradient_stop() {
        let f = ring_quadratic(5);
        let mut cfg = SolverConfig::new(0.5, 1_000_000);
        cfg.stop = StopRule::GradNorm { tol: 1e-8 };
        cfg.record_every = 10;
        let trace = run(&f, None, ring_walk(5), cfg, SeedStreams::new(0, 0)).unwrap();
        assert_eq!(trace.stop_reason, StopReason::GradNorm);
        assert!(trace.last().grad_norm <= 1e-8);
        assert!(trace.iterations() < 1_000_000);
    }
}
