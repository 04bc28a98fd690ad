use std::sync::Arc;

use super::{DcaState, ErmDualProblem};
use crate::chain::{TransitionSchedule, WalkSampler};
use crate::rng::{Purpose, SeedStreams};
use crate::select::{BlockSelector, IidSelector};
use crate::solver::{mcbcd_step, Perturbation, RunError, Solver, SolverConfig, SolverError, StepContext, StepInfo, Trace};

/// Floor `δ = 1/(2|Ξ|ρ)` for a sample space of size `n` whose masses are
/// known to lie within a factor `ratio` of each other, so that `δ ≤ p_min/2`.
pub fn default_floor(n: usize, ratio: f64) -> f64 {
    1.0 / (2.0 * n as f64 * ratio.max(1.0))
}

/// Visit counts `c_ξ(k)` and floored frequency estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCounter {
    counts: Vec<u64>,
    total: u64,
    floor: f64,
}

impl FrequencyCounter {
    pub fn new(n: usize, floor: f64) -> Result<Self, SolverError> {
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(SolverError::Config(format!("frequency floor {floor} must lie in (0, 1]")));
        }
        Ok(Self { counts: vec![0; n], total: 0, floor })
    }

    pub fn observe(&mut self, xi: usize) {
        self.counts[xi] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `c_ξ(k)/k` without the floor; zero before any observation.
    pub fn frequency(&self, xi: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[xi] as f64 / self.total as f64
        }
    }

    /// `max(c_ξ(k)/k, δ)`.
    pub fn estimate(&self, xi: usize) -> f64 {
        self.frequency(xi).max(self.floor).min(1.0)
    }

    pub fn estimates(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.estimate(i)).collect()
    }
}

struct CountingNoise<'a> {
    problem: &'a ErmDualProblem,
    counter: &'a mut FrequencyCounter,
}

impl Perturbation for CountingNoise<'_> {
    fn perturb(&mut self, ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError> {
        self.counter.observe(ctx.block);
        let estimate = self.counter.estimate(ctx.block);
        Ok(Some(vec![self.problem.mass_error(ctx.x, ctx.block, estimate)]))
    }
}

/// Gradient error from replacing `p_ξ` by running frequencies.
pub struct EmpiricalNoise<'a> {
    problem: &'a ErmDualProblem,
    counter: FrequencyCounter,
}

impl<'a> EmpiricalNoise<'a> {
    pub fn new(problem: &'a ErmDualProblem, counter: FrequencyCounter) -> Self {
        Self { problem, counter }
    }

    pub fn counter(&self) -> &FrequencyCounter {
        &self.counter
    }

    pub fn into_counter(self) -> FrequencyCounter {
        self.counter
    }
}

impl Perturbation for EmpiricalNoise<'_> {
    fn perturb(&mut self, ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError> {
        CountingNoise { problem: self.problem, counter: &mut self.counter }.perturb(ctx)
    }
}

/// Gradient error from a fixed mass estimate `p̄`.
pub struct FixedMassNoise<'a> {
    problem: &'a ErmDualProblem,
    estimates: Vec<f64>,
}

impl<'a> FixedMassNoise<'a> {
    pub fn new(problem: &'a ErmDualProblem, estimates: Vec<f64>) -> Result<Self, SolverError> {
        if estimates.len() != problem.sample_count() || estimates.iter().any(|&p| !(p > 0.0)) {
            return Err(SolverError::Config("mass estimates must be positive, one per sample".into()));
        }
        Ok(Self { problem, estimates })
    }
}

impl Perturbation for FixedMassNoise<'_> {
    fn perturb(&mut self, ctx: &StepContext<'_>) -> Result<Option<Vec<f64>>, SolverError> {
        let p = self.estimates[ctx.block];
        Ok(Some(vec![self.problem.mass_error(ctx.x, ctx.block, p)]))
    }
}

/// Count `ξ^k`, then step with `∇F*(−α_ξ/p̄)` in place of `∇F*(−α_ξ/p_ξ)`.
pub fn empirical_mcdca_step(
    prob: &ErmDualProblem,
    state: &mut DcaState,
    freq: &mut FrequencyCounter,
    selector: &mut dyn BlockSelector,
    gamma: f64,
) -> Result<StepInfo, SolverError> {
    let mut noise = CountingNoise { problem: prob, counter: freq };
    mcbcd_step(prob, state.iterate_mut(), selector, gamma, &mut noise)
}

fn gap_solver<'a>(prob: &'a ErmDualProblem, cfg: SolverConfig) -> Solver<'a> {
    Solver::new(prob, cfg).with_metrics(|alpha| vec![("duality_gap".to_string(), prob.duality_gap(alpha))])
}

/// Empirical MC-DCA along a walk whose stationary distribution is the
/// (unknown to the method) mass vector. Returns the trace and final counts.
pub fn run_empirical_mcdca(
    prob: &ErmDualProblem,
    schedule: Arc<TransitionSchedule>,
    floor: f64,
    cfg: SolverConfig,
    streams: SeedStreams,
) -> Result<(Trace, FrequencyCounter), RunError> {
    let counter = FrequencyCounter::new(prob.sample_count(), floor).map_err(RunError::Invalid)?;
    let mut noise = EmpiricalNoise::new(prob, counter);
    let trace = gap_solver(prob, cfg).run_chain_with(schedule, streams, &mut noise)?;
    Ok((trace, noise.into_counter()))
}

/// SDCA with i.i.d. uniform sample indices and fixed mass estimates.
pub fn sdca_baseline(
    prob: &ErmDualProblem,
    estimated_masses: Vec<f64>,
    cfg: SolverConfig,
    streams: SeedStreams,
) -> Result<Trace, RunError> {
    let mut noise = FixedMassNoise::new(prob, estimated_masses).map_err(RunError::Invalid)?;
    let mut selector = IidSelector::uniform(prob.sample_count(), streams.rng(Purpose::Selection));
    gap_solver(prob, cfg).run_with_selector(&mut selector, &mut noise)
}

/// Simulate `samples` transitions and return floored visit frequencies.
pub fn estimate_masses(sampler: &mut WalkSampler, samples: usize, floor: f64) -> Result<Vec<f64>, SolverError> {
    let mut counter = FrequencyCounter::new(sampler.block_count(), floor)?;
    for _ in 0..samples {
        counter.observe(sampler.next_block());
    }
    Ok(counter.estimates())
}
