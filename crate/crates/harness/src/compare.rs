//! Seed-averaged comparison of block-selection rules on one instance.

use std::fmt::Write as _;

use mcbcd_core::analysis::SeedAverage;
use mcbcd_core::rng::{Purpose, SeedStreams};
use mcbcd_core::solver::{ModelNoise, Solver};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::registry::{Instance, Problem};
use crate::rules::SelectionRule;
use crate::runner::{align_curves, metric_curve, metric_name, solver_config, with_pool};

#[derive(Debug, Clone, Serialize)]
pub struct RuleResult {
    pub rule: String,
    pub mean: SeedAverage,
    /// Seeds whose metric reached the tolerance.
    pub reached: usize,
    /// Mean first recorded `k` with metric ≤ tolerance, over seeds that got there.
    pub mean_iterations_to_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub experiment: String,
    pub metric: &'static str,
    pub tolerance: f64,
    pub seeds: usize,
    pub rules: Vec<RuleResult>,
}

impl ComparisonTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("{} on {} (tolerance {:e})\n", self.metric, self.experiment, self.tolerance);
        writeln!(s, "{:<24} {:>14} {:>10} {:>16}", "rule", "final mean", "reached", "mean k to tol").unwrap();
        for r in &self.rules {
            writeln!(
                s,
                "{:<24} {:>14.6e} {:>7}/{:<2} {:>16}",
                r.rule,
                r.mean.mean.last().copied().unwrap_or(f64::NAN),
                r.reached,
                self.seeds,
                r.mean_iterations_to_tol.map_or("-".to_string(), |k| format!("{k:.1}"))
            )
            .unwrap();
        }
        s
    }

    /// `k,<rule>_mean,<rule>_band,…` on the first rule's grid.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k");
        for r in &self.rules {
            write!(s, ",{0}_mean,{0}_band", r.rule).unwrap();
        }
        s.push('\n');
        let Some(first) = self.rules.first() else { return s };
        for (i, k) in first.mean.k.iter().enumerate() {
            write!(s, "{k}").unwrap();
            for r in &self.rules {
                match r.mean.k.get(i) {
                    Some(kk) if kk == k => write!(s, ",{:?},{:?}", r.mean.mean[i], r.mean.band[i]).unwrap(),
                    _ => s.push_str(",,"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Runs every rule on the configured instance with the configured seeds,
/// step size and noise. Only plain block-descent experiments qualify.
pub fn compare_rules(
    cfg: &ExperimentConfig,
    rules: &[SelectionRule],
    tolerance: f64,
    workers: Option<usize>,
) -> Result<ComparisonTable, HarnessError> {
    let inst = Instance::build(cfg)?;
    if matches!(inst.problem, Problem::Dmdp { .. } | Problem::EmpiricalDca { .. }) {
        return Err(HarnessError::Config(format!("{} does not support rule comparison", cfg.experiment)));
    }
    let n = inst.info.blocks;
    for r in rules {
        r.validate(n)?;
    }
    let obj = inst.problem.objective();
    let mut results = Vec::new();
    for rule in rules {
        let curves = with_pool(workers, || {
            (0..cfg.seeds.count as u64)
                .into_par_iter()
                .map(|i| {
                    let streams = SeedStreams::new(cfg.seeds.base, i);
                    let mut selector = rule.selector(n, &inst.schedule, streams)?;
                    let mut noise = ModelNoise::new(cfg.solver.noise.model(), streams.rng(Purpose::Noise));
                    let mut solver = Solver::new(obj, solver_config(&inst, cfg));
                    if let Some(g) = inst.problem.nonsmooth() {
                        solver = solver.with_nonsmooth(g);
                    }
                    let trace = solver
                        .run_with_selector(&mut selector, &mut noise)
                        .map_err(|e| HarnessError::Solver(e.error().clone()))?;
                    Ok(metric_curve(&inst, &trace))
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })??;
        let hits: Vec<usize> =
            curves.iter().filter_map(|c| c.iter().find(|p| p.1 <= tolerance).map(|p| p.0)).collect();
        results.push(RuleResult {
            rule: rule.to_string(),
            mean: SeedAverage::from_curves(&align_curves(&curves))?,
            reached: hits.len(),
            mean_iterations_to_tol: (!hits.is_empty())
                .then(|| hits.iter().sum::<usize>() as f64 / hits.len() as f64),
        });
    }
    Ok(ComparisonTable {
        experiment: cfg.experiment.clone(),
        metric: metric_name(inst.experiment),
        tolerance,
        seeds: cfg.seeds.count,
        rules: results,
    })
}
