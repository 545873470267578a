//! Config-driven experiment runner around the `aitsahalia` crate.
//!
//! The binary reads a flat `key = value` configuration, runs one of three
//! experiments (convergence, positivity, moments) and writes a CSV or JSON
//! result file. Exit codes: 0 success, 2 config error, 3 simulation abort,
//! 4 I/O failure.

use thiserror::Error;

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, ExperimentKind, OutputFormat, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(#[from] aitsahalia::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
