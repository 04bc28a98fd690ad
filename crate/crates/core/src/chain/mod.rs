//! Finite-state Markov chains on strongly connected graphs.

mod graph;
mod json;
mod mixing;
mod sampler;
mod schedule;
mod stationary;

pub use graph::Graph;
pub use json::{ChainDescription, PolicyName};
pub use mixing::{
    default_horizon, internal_tau, mixing_time, phi_product, second_eigenvalue_modulus,
    spectral_mixing_bound, InternalTau, MixingCurve, MixingProfile,
};
pub use sampler::WalkSampler;
pub use schedule::{build_random_walk, Repetition, TransitionSchedule, WalkPolicy};
pub use stationary::{
    stationary_distribution, stationary_distribution_with, verify_stationary, PowerIteration,
    StationaryDistribution,
};

use thiserror::Error;

/// Tolerance for row sums of transition matrices.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default cap on the number of states for dense storage.
pub const MAX_STATES: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("graph has {0} nodes, above the dense-storage cap of {MAX_STATES}")]
    TooLarge(usize),
    #[error("edge ({0}, {1}) references a node outside the graph")]
    NodeOutOfRange(usize, usize),
    #[error("self-loop at node {0} but self-loops are not allowed")]
    SelfLoopNotAllowed(usize),
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("node {0} has no outgoing transitions")]
    DeadEnd(usize),
    #[error("lazy Metropolis walk requires an undirected (symmetric) graph")]
    AsymmetricGraph,
    #[error("target distribution is invalid: {0}")]
    InvalidTarget(String),
    #[error("matrix {index} is not a valid transition matrix: {reason}")]
    InvalidMatrix { index: usize, reason: String },
    #[error("transition ({from}, {to}) has positive probability but is not an edge of the support graph")]
    OffSupport { from: usize, to: usize },
    #[error("schedule has no matrices")]
    EmptySchedule,
    #[error("power iteration did not converge within {0} iterations (periodic or reducible chain)")]
    NoConvergence(usize),
    #[error("stationary distribution has a non-positive entry at state {0}")]
    NotPositive(usize),
    #[error("candidate is not stationary for matrix {index}: residual {residual:e}")]
    NotStationary { index: usize, residual: f64 },
    #[error("chain does not mix to epsilon = {epsilon} within horizon {horizon}")]
    DoesNotMix { epsilon: f64, horizon: usize },
    #[error("entry bound violated: [Phi]_(i,j) = {value:e} < pi_min/2 = {bound:e} at n = {n}")]
    EntryBoundViolated { value: f64, bound: f64, n: usize },
    #[error("second eigenvalue modulus {0} is not below 1: chain does not mix")]
    NonMixingSpectrum(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("malformed chain description: {0}")]
    Description(String),
}
