//! Configuration and orchestration behind the `rbmim` command.

pub mod config;
pub mod runner;

pub use config::{load_config, ExperimentConfig, StreamSpec, Sweep};
pub use runner::{generate, run_experiment, ExperimentSummary, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<rbmim::error::Error> for CliError {
    fn from(e: rbmim::error::Error) -> Self {
        match e {
            rbmim::error::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
