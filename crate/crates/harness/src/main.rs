use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcbcd_core::chain::{default_horizon, mixing_time, second_eigenvalue_modulus, spectral_mixing_bound, ChainDescription};
use mcbcd_core::dmdp::{direct_solve, evaluate_policy_mcbcd, DmdpModel, Selection, TransitionOracle};
use mcbcd_core::linalg::dist_inf;
use mcbcd_core::rng::{Purpose, SeedStreams};
use mcbcd_core::solver::{SolverConfig, StopRule};
use mcbcd_core::objective::BlockObjective;
use mcbcd_core::dmdp::DmdpObjective;
use mcbcd_harness::{
    audit_directory, compare_rules, registry, run_experiment, ExperimentConfig, HarnessError, Overrides, RunOptions,
    SelectionRule,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mcbcd", version, about = "Markov-chain block coordinate descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Base seed for the replica streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration cap.
    #[arg(long)]
    iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of replicas.
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, iters: self.iters, out: self.out.clone(), seeds: self.seeds }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a registry name.
    Run {
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Mixing time and spectral bound of a chain description.
    Mix {
        chain: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Verification window; 10 N² by default.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Coordinate policy evaluation of a model file against the direct solve.
    Dmdp {
        model: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1_000_000)]
        iters: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Transitions per Monte-Carlo row estimate; exact oracle when omitted.
        #[arg(long)]
        samples: Option<usize>,
        /// Stop once the gradient norm falls below this.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Compare block-selection rules on one experiment.
    Compare {
        config: String,
        /// Comma-separated rules: markov, iid[:p..], cyclic[:order], essentially-cyclic:K.
        #[arg(long, value_delimiter = ' ', num_args = 1..)]
        rules: Vec<String>,
        /// Tolerance for the iterations-to-tolerance table.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the seeds of an output directory and check pathwise inequalities.
    Audit { dir: PathBuf },
    /// List registry experiments.
    List,
    /// Print the default config of an experiment.
    Init { experiment: String },
}

fn load_config(spec: &str) -> Result<ExperimentConfig, HarnessError> {
    let path = Path::new(spec);
    if path.exists() {
        ExperimentConfig::load(path)
    } else {
        ExperimentConfig::defaults(spec)
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config, common } => {
            let mut cfg = load_config(&config)?;
            cfg.apply(&common.overrides());
            cfg.validate()?;
            let summary = run_experiment(&cfg, &RunOptions { workers: common.workers, dry: false })?;
            print!("{}", summary.to_text());
            println!("output: {}", cfg.output.dir.display());
            let failed = summary.failed_seeds();
            if failed > 0 {
                eprintln!("{}", HarnessError::SeedFailures { failed, total: summary.seeds.len() });
                return Ok(ExitCode::from(1));
            }
        }
        Command::Mix { chain, eps, horizon } => {
            let desc = ChainDescription::from_json(&read(&chain)?)?;
            let schedule = desc.to_schedule()?;
            let horizon = horizon.unwrap_or_else(|| default_horizon(schedule.state_count()));
            let profile = mixing_time(&schedule, eps, horizon)?;
            let mut out = serde_json::to_value(&profile).expect("serializable");
            if schedule.is_homogeneous() {
                let p = &schedule.matrices()[0];
                out["second_eigenvalue_modulus"] = json!(second_eigenvalue_modulus(p).ok());
                out["spectral_bound"] = json!(spectral_mixing_bound(p, eps).ok());
            }
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        }
        Command::Dmdp { model, lambda, iters, seed, samples, tol } => {
            let model = DmdpModel::from_json(&read(&model)?)?;
            let objective = DmdpObjective::new(model.clone(), lambda)?;
            let mut cfg = SolverConfig::new(1.0 / objective.smoothness().block_lipschitz, iters);
            cfg.stop = StopRule::GradNorm { tol };
            cfg.record_every = 1000;
            let streams = SeedStreams::new(seed, 0);
            let mut oracle = match samples {
                None => TransitionOracle::exact(&model),
                Some(m) => TransitionOracle::monte_carlo(&model, m, streams.rng(Purpose::Oracle), None)
                    .map_err(|e| HarnessError::Config(format!("oracle: {e}")))?,
            };
            let (estimate, trace) = evaluate_policy_mcbcd(&model, &mut oracle, Selection::FromModel, lambda, cfg, streams)
                .map_err(|e| HarnessError::Solver(e.error().clone()))?;
            let direct = direct_solve(&model);
            let out = json!({
                "v": estimate.v,
                "direct": direct.v,
                "max_abs_error": dist_inf(&estimate.v, &direct.v),
                "bellman_residual": estimate.residual,
                "iterations": trace.iterations(),
                "transitions_used": oracle.transitions_used(),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        }
        Command::Compare { config, rules, tol, common } => {
            let mut cfg = load_config(&config)?;
            cfg.apply(&common.overrides());
            cfg.validate()?;
            let rules: Vec<SelectionRule> = rules
                .iter()
                .flat_map(|r| r.split(';'))
                .filter(|r| !r.is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()?;
            if rules.is_empty() {
                return Err(HarnessError::Config("no rules given".into()));
            }
            let table = compare_rules(&cfg, &rules, tol, common.workers)?;
            print!("{}", table.to_text());
            if common.out.is_some() {
                let dir = &cfg.output.dir;
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
                let j = serde_json::to_string_pretty(&table).expect("serializable") + "\n";
                std::fs::write(dir.join("compare.json"), j).map_err(|e| HarnessError::io(dir, e))?;
                std::fs::write(dir.join("compare.csv"), table.to_csv()).map_err(|e| HarnessError::io(dir, e))?;
            }
        }
        Command::Audit { dir } => {
            let outcome = audit_directory(&dir)?;
            print!("{}", outcome.to_text());
            if !outcome.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::List => {
            for e in registry() {
                println!("{:<24} {}", e.name, e.description);
            }
        }
        Command::Init { experiment } => print!("{}", ExperimentConfig::defaults(&experiment)?.to_toml()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
