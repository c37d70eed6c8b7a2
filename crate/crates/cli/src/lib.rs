//! Library side of the `bdlp` command-line tool: configuration, the
//! subcommands as functions returning file contents, and output formats.

pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

pub use config::{ExperimentConfig, LoadedConfig};

/// Failure of a subcommand, carrying its process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("checks failed: {0}")]
    ChecksFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Solver(_) | Self::NotConverged(_) => 3,
            Self::ChecksFailed(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
