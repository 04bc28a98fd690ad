//! Dual coordinate ascent.
//!
//! The dual is minimized (not maximized), so the duality gap is
//! `P(w(α)) + D(α) ≥ 0`. The primal point `w(α) = Aα` is carried along as
//! the objective's residual cache, so each step touches one column of `A`.

mod empirical;
mod erm;

pub use empirical::{
    default_floor, empirical_mcdca_step, estimate_masses, run_empirical_mcdca, sdca_baseline,
    EmpiricalNoise, FixedMassNoise, FrequencyCounter,
};
pub use erm::ErmDualProblem;

use std::sync::Arc;

use crate::chain::TransitionSchedule;
use crate::objective::{BlockObjective, DcaDualObjective};
use crate::rng::SeedStreams;
use crate::select::BlockSelector;
use crate::solver::{
    mcbcd_step, IterateState, NoPerturbation, Perturbation, RunError, Solver, SolverConfig, SolverError,
    StepInfo, Trace,
};

/// Dual iterate `α^k` with the cached `w^k = Aα^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DcaState {
    inner: IterateState,
}

impl DcaState {
    pub fn new(prob: &dyn BlockObjective, alpha: Vec<f64>) -> Result<Self, SolverError> {
        let inner = IterateState::new(prob, alpha)?;
        if inner.cache.is_none() {
            return Err(SolverError::Config("dual objective keeps no primal cache".into()));
        }
        Ok(Self { inner })
    }

    pub fn zero(prob: &dyn BlockObjective) -> Self {
        Self::new(prob, vec![0.0; prob.layout().dim()]).expect("dual objectives keep a cache")
    }

    pub fn alpha(&self) -> &[f64] {
        &self.inner.x
    }

    /// Cached `w = Aα`.
    pub fn w(&self) -> &[f64] {
        &self.inner.cache.as_ref().expect("checked at construction").values
    }

    pub fn k(&self) -> usize {
        self.inner.k
    }

    pub fn iterate(&self) -> &IterateState {
        &self.inner
    }

    pub(crate) fn iterate_mut(&mut self) -> &mut IterateState {
        &mut self.inner
    }
}

/// `α_{i_k} ← α_{i_k} − γ(λA_{i_k}ᵀw − (1/N)∇ℓ*_{i_k}(−α_{i_k}))`, then `w ← w + A_{i_k}δ`.
pub fn mcdca_step(
    prob: &DcaDualObjective,
    state: &mut DcaState,
    selector: &mut dyn BlockSelector,
    gamma: f64,
) -> Result<StepInfo, SolverError> {
    mcbcd_step(prob, state.iterate_mut(), selector, gamma, &mut NoPerturbation)
}

pub fn primal_from_dual(state: &DcaState) -> Vec<f64> {
    state.w().to_vec()
}

pub fn duality_gap(prob: &DcaDualObjective, state: &DcaState) -> f64 {
    prob.primal(state.w()) + prob.dual_with_map(state.alpha(), state.w())
}

/// MC-DCA along a walk, recording the duality gap.
pub fn run_mcdca(
    prob: &DcaDualObjective,
    schedule: Arc<TransitionSchedule>,
    cfg: SolverConfig,
    streams: SeedStreams,
) -> Result<Trace, RunError> {
    Solver::new(prob, cfg)
        .with_metrics(|alpha| vec![("duality_gap".to_string(), prob.duality_gap(alpha))])
        .run_chain(schedule, streams)
}

/// MC-DCA with an arbitrary selector and error source.
pub fn run_mcdca_with(
    prob: &DcaDualObjective,
    selector: &mut dyn BlockSelector,
    perturbation: &mut dyn Perturbation,
    cfg: SolverConfig,
) -> Result<Trace, RunError> {
    Solver::new(prob, cfg)
        .with_metrics(|alpha| vec![("duality_gap".to_string(), prob.duality_gap(alpha))])
        .run_with_selector(selector, perturbation)
}
