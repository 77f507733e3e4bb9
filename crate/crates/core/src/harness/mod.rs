//! Monte-Carlo experiments, oracle verification and cost sweeps behind the
//! command-line tool.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{BenchConfig, DeltaScale, ExperimentConfig, Scenario, SchemeMode};
pub use experiment::{run_experiment, scenario_setup, threads_from_env, ScenarioSetup, AggregateRow, DropResult, ExperimentOutput, SchemeOutcome};
pub use verify::{design_deviation, verify, VerifyReport};

use crate::error::BeamError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad configuration file, override or environment variable.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}
