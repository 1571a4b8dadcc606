use std::io;
use std::path::Path;

use qdrl_core::agent::AgentError;
use qdrl_core::config::ConfigError;
use qdrl_core::lfc::LfcError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    /// Bad arguments or input files that parse but do not fit (schema, dimensions).
    #[error("{0}")]
    Invalid(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Grid(#[from] LfcError),
    #[error("csv error on {path}: {source}")]
    Csv { path: String, source: csv::Error },
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.display().to_string(), source }
    }

    pub fn csv(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
        move |source| CliError::Csv { path: path.display().to_string(), source }
    }

    /// Process exit status: 2 configuration or input error, 3 simulation
    /// divergence, 4 I/O failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Csv { source, .. } if source.is_io_error() => 4,
            CliError::Csv { .. } => 2,
            CliError::Agent(e) => match e {
                AgentError::Grid(g) => grid_code(g),
                AgentError::Io { .. } => 4,
                _ => 2,
            },
            CliError::Grid(g) => grid_code(g),
        }
    }
}

fn grid_code(e: &LfcError) -> u8 {
    match e {
        LfcError::Divergence { .. } => 3,
        LfcError::Io(_) => 4,
        LfcError::Validation(_) => 2,
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
