//! Experiment harness for Markov-chain block coordinate descent: a registry
//! of named experiments, TOML configuration, multi-seed execution with
//! deterministic output directories, rule comparisons, communication
//! accounting and pathwise audits of stored runs.

pub mod audit;
pub mod comm;
pub mod compare;
pub mod config;
pub mod error;
pub mod registry;
pub mod rules;
pub mod runner;

pub use audit::{audit_directory, AuditOutcome};
pub use comm::CommStats;
pub use compare::{compare_rules, ComparisonTable};
pub use config::{ExperimentConfig, Overrides};
pub use error::HarnessError;
pub use registry::{registry, Experiment, Instance, Problem};
pub use rules::SelectionRule;
pub use runner::{run_experiment, run_seed, RunOptions, RunSummary};
