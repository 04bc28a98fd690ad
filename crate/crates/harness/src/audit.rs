//! Re-runs the seeds of an output directory with iterates retained and
//! checks the pathwise inequalities along each realized path.

use std::path::Path;

use mcbcd_core::chain::{default_horizon, internal_tau};
use mcbcd_core::solver::{pathwise_audit, prox_descent_audit, AuditReport};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::registry::Instance;
use crate::runner::run_seed;

#[derive(Debug, Clone, Serialize)]
pub struct SeedAudit {
    pub index: u64,
    /// Whether the re-run reproduced the stored `trace.csv` byte for byte.
    pub reproduced: Option<bool>,
    pub reports: Vec<AuditReport>,
    pub error: Option<String>,
}

impl SeedAudit {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.reproduced != Some(false) && self.reports.iter().all(|r| r.passed())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditOutcome {
    pub experiment: String,
    pub tau: usize,
    pub seeds: Vec<SeedAudit>,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.seeds.iter().all(|s| s.passed())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("audit of {} (tau = {})\n", self.experiment, self.tau);
        for s in &self.seeds {
            let mut parts: Vec<String> = s
                .reports
                .iter()
                .map(|r| format!("{} {}/{} violations", r.name, r.violations, r.checked))
                .collect();
            if let Some(rep) = s.reproduced {
                parts.push(format!("reproduced {rep}"));
            }
            if let Some(e) = &s.error {
                parts.push(format!("error: {e}"));
            }
            out.push_str(&format!(
                "seed {:03}: {} [{}]\n",
                s.index,
                if s.passed() { "PASS" } else { "FAIL" },
                parts.join(", ")
            ));
        }
        out
    }
}

/// Audits the run stored in `dir` (as written by `run_experiment`).
pub fn audit_directory(dir: &Path) -> Result<AuditOutcome, HarnessError> {
    let cfg = ExperimentConfig::load(&dir.join("config.toml"))?;
    let inst = Instance::build(&cfg)?;
    let tau = match inst.info.tau {
        Some(t) => t,
        None => internal_tau(&inst.schedule, default_horizon(inst.info.blocks)).map(|t| t.tau).unwrap_or(1),
    };
    let obj = inst.problem.objective();
    let mut seeds = Vec::new();
    for index in 0..cfg.seeds.count as u64 {
        let stored = std::fs::read_to_string(dir.join(format!("seed_{index:03}")).join("trace.csv")).ok();
        let mut audit = SeedAudit { index, reproduced: None, reports: Vec::new(), error: None };
        match run_seed(&inst, &cfg, index, true) {
            Err(e) => audit.error = Some(e.to_string()),
            Ok(trace) => {
                audit.reproduced = stored.map(|s| s == trace.to_csv());
                let result = match inst.problem.nonsmooth() {
                    Some(g) => prox_descent_audit(&trace, obj, g).map(|r| vec![r]),
                    None => pathwise_audit(&trace, obj, tau).map(|a| vec![a.step_sum, a.delayed_gradient]),
                };
                match result {
                    Ok(r) => audit.reports = r,
                    Err(e) => audit.error = Some(e.to_string()),
                }
            }
        }
        seeds.push(audit);
    }
    Ok(AuditOutcome { experiment: cfg.experiment, tau, seeds })
}
