use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Metrics at iterate `x^k`.
///
/// `block`, `step_norm` and `noise_norm` describe the step that produced
/// `x^k` (block `i_{k−1}`, `‖Δ^{k−1}‖`, `‖ε^{k−1}‖`); they are `None` and
/// zero for the initial record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub block: Option<usize>,
    pub f_value: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub noise_norm: f64,
    pub extra: BTreeMap<String, f64>,
}

/// Step `k`, taking `x^k` to `x^{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub block: usize,
    pub step_norm_sq: f64,
    pub noise_norm_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheAudit {
    pub k: usize,
    /// `max_j |cached_j − fresh_j| / (1 + max_j |fresh_j|)`.
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    IterCap,
    GradNorm,
    ObjectiveGap,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Every step, recorded or not.
    pub steps: Vec<StepInfo>,
    /// `x^0, …, x^K` when iterate storage is enabled.
    pub iterates: Option<Vec<Vec<f64>>>,
    pub final_x: Vec<f64>,
    pub cache_audits: Vec<CacheAudit>,
    pub stop_reason: StopReason,
    pub warnings: Vec<String>,
    pub step_size: f64,
    pub proximal: bool,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn initial(&self) -> &TraceRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace always holds the initial record")
    }

    pub fn blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.block)
    }

    /// `Σ_k ‖ε^k‖²` along the run.
    pub fn noise_energy(&self) -> f64 {
        self.steps.iter().map(|s| s.noise_norm_sq).sum()
    }

    pub fn max_cache_drift(&self) -> f64 {
        self.cache_audits.iter().map(|a| a.drift).fold(0.0, f64::max)
    }

    fn extra_keys(&self) -> Vec<&str> {
        let mut keys: Vec<&str> = self
            .records
            .iter()
            .flat_map(|r| r.extra.keys().map(String::as_str))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    /// `k,block,f,grad_norm,step_norm,noise_norm,<extras>`, blocks 1-based,
/// numbers in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let keys = self.extra_keys();
        let mut out = String::from("k,block,f,grad_norm,step_norm,noise_norm");
        for key in &keys {
            out.push(',');
            out.push_str(key);
        }
        out.push('\n');
        for r in &self.records {
            let block = r.block.map(|b| (b + 1).to_string()).unwrap_or_default();
            write!(out, "{},{},{:?},{:?},{:?},{:?}", r.k, block, r.f_value, r.grad_norm, r.step_norm, r.noise_norm)
                .unwrap();
            for key in &keys {
                out.push(',');
                if let Some(v) = r.extra.get(*key) {
                    write!(out, "{v:?}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// One JSON object per record, blocks 1-based.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mut obj = serde_json::Map::new();
            obj.insert("k".into(), r.k.into());
            obj.insert("block".into(), r.block.map(|b| b + 1).into());
            obj.insert("f".into(), r.f_value.into());
            obj.insert("grad_norm".into(), r.grad_norm.into());
            obj.insert("step_norm".into(), r.step_norm.into());
            obj.insert("noise_norm".into(), r.noise_norm.into());
            for (key, v) in &r.extra {
                obj.insert(key.clone(), (*v).into());
            }
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    pub fn write_jsonl(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}
