//! Declarative experiments: configuration files, check dispatch, result
//! files, sweeps and summaries.

pub mod config;
pub mod output;
pub mod report;
pub mod run;
pub mod sweep;

use thiserror::Error;

use crate::error::LabError;

pub use config::{CheckEntry, CheckKind, ExperimentConfig, Times};
pub use output::write_experiment;
pub use report::{load_summary, render_summary};
pub use run::{run_experiment, Experiment, RunOptions};
pub use sweep::{run_sweep, SweepAxis, SweepOutcome};

pub const EXIT_CHECKS_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Errors that end a run, grouped by exit status.
#[derive(Debug, Clone, Error)]
pub enum HarnessError {
    #[error("{code}: {0}", code = .0.code())]
    Config(LabError),
    #[error("{code}: {0}", code = .0.code())]
    Solver(LabError),
    #[error("{code}: {0}", code = .0.code())]
    Io(LabError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Solver(_) | HarnessError::Io(_) => EXIT_SOLVER,
        }
    }
}
