use std::io;
use std::path::PathBuf;

use mcbcd_core::analysis::AnalysisError;
use mcbcd_core::chain::ChainError;
use mcbcd_core::dmdp::DmdpError;
use mcbcd_core::objective::ObjectiveError;
use mcbcd_core::solver::SolverError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Dmdp(#[from] DmdpError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{failed} of {total} seeds failed")]
    SeedFailures { failed: usize, total: usize },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }

    /// `1` for failed seeds, `2` for anything that stops a run from starting.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::SeedFailures { .. } => 1,
            _ => 2,
        }
    }
}
