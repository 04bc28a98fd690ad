//! Experiment configuration files (TOML).
//!
//! A file names a registry experiment and overrides any subset of its
//! defaults; tables are merged key by key, so
//!
//! ```toml
//! experiment = "quadratic-ring"
//! [solver]
//! max_iters = 2000
//! ```
//!
//! keeps every other default. [`ExperimentConfig::to_toml`] writes the fully
//! resolved form, which parses back to the same value.

use std::path::{Path, PathBuf};

use mcbcd_core::solver::{NoiseModel, StopRule};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::registry::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub problem: ProblemParams,
    pub chain: ChainParams,
    pub solver: SolverParams,
    pub seeds: SeedParams,
    pub output: OutputParams,
}

/// Instance parameters. Fields an experiment does not use are left unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    /// Number of blocks (agents, states, samples).
    pub size: usize,
    /// Seed of the instance generator, independent of the replica seeds.
    pub instance_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<usize>,
    /// Smallest and largest positive Hessian eigenvalue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Transitions per Monte-Carlo row estimate; exact oracle when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_samples: Option<usize>,
    /// Upper bound on `max π / min π` used for the frequency floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Ring,
    Path,
    Complete,
    /// Ring plus undirected chords `i ~ i + chord_offset`.
    RingChords,
    /// The transition matrix of the policy-evaluation model itself.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    Simple,
    LazyMetropolis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub graph: GraphKind,
    pub self_loops: bool,
    pub walk: WalkKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chord_offset: Option<usize>,
    /// Metropolis target proportional to weights drawn uniformly from this
    /// range with the instance seed; uniform target when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_weights: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    SquareSummable { sigma0: f64 },
    Bounded { level: f64 },
}

impl NoiseSpec {
    pub fn model(&self) -> NoiseModel {
        match *self {
            NoiseSpec::None => NoiseModel::None,
            NoiseSpec::SquareSummable { sigma0 } => NoiseModel::SquareSummable { sigma0 },
            NoiseSpec::Bounded { level } => NoiseModel::Bounded { level },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    /// `γ = step_scale / L`.
    pub step_scale: f64,
    pub max_iters: usize,
    pub record_every: usize,
    pub noise: NoiseSpec,
    pub stop: StopRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedParams {
    pub count: usize,
    pub base: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputParams {
    pub dir: PathBuf,
    pub formats: Vec<TraceFormat>,
}

/// Command-line overrides applied after the file is read.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub seeds: Option<usize>,
}

impl ExperimentConfig {
    /// Registry defaults for `name`.
    pub fn defaults(name: &str) -> Result<Self, HarnessError> {
        Ok(Experiment::from_name(name)?.default_config())
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let user: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let name = user
            .get("experiment")
            .and_then(|v| v.as_str())
            .ok_or_else(|| HarnessError::Config("missing `experiment` name".into()))?;
        let defaults = Self::defaults(name)?;
        let mut merged = toml::Table::try_from(&defaults).map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seeds.base = seed;
        }
        if let Some(iters) = o.iters {
            self.solver.max_iters = iters;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(count) = o.seeds {
            self.seeds.count = count;
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        Experiment::from_name(&self.experiment)?;
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.problem.size == 0 {
            return bad("problem.size must be positive".into());
        }
        if !(self.solver.step_scale > 0.0) {
            return bad(format!("solver.step_scale {} must be positive", self.solver.step_scale));
        }
        if self.solver.record_every == 0 {
            return bad("solver.record_every must be positive".into());
        }
        if self.seeds.count == 0 {
            return bad("seeds.count must be positive".into());
        }
        self.solver.noise.model().validate()?;
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Experiment;

    #[test]
    fn defaults_round_trip() {
        for e in Experiment::ALL {
            let cfg = e.default_config();
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn partial_override_keeps_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "experiment = \"quadratic-ring\"\n[solver]\nmax_iters = 77\nnoise = { kind = \"bounded\", level = 0.5 }\n",
        )
        .unwrap();
        let base = ExperimentConfig::defaults("quadratic-ring").unwrap();
        assert_eq!(cfg.solver.max_iters, 77);
        assert_eq!(cfg.solver.noise, NoiseSpec::Bounded { level: 0.5 });
        assert_eq!(cfg.solver.step_scale, base.solver.step_scale);
        assert_eq!(cfg.chain, base.chain);
    }

    #[test]
    fn rejects_typos_and_unknown_names() {
        assert!(matches!(
            ExperimentConfig::from_toml("experiment = \"quadratic-ring\"\n[solver]\nmax_iter = 3\n"),
            Err(HarnessError::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("experiment = \"nope\"\n"),
            Err(HarnessError::UnknownExperiment(_))
        ));
        assert!(ExperimentConfig::from_toml("[solver]\nmax_iters = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"quadratic-ring\"\n[seeds]\ncount = 0\n").is_err());
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::defaults("dmdp-eval").unwrap();
        cfg.apply(&Overrides { seed: Some(9), iters: Some(5), out: Some("x".into()), seeds: Some(2) });
        assert_eq!((cfg.seeds.base, cfg.seeds.count, cfg.solver.max_iters), (9, 2, 5));
        assert_eq!(cfg.output.dir, PathBuf::from("x"));
    }
}
