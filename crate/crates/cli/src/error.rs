use std::path::PathBuf;

use thiserror::Error;

/// Failures of a pipeline stage, each tied to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("missing or unreadable artifact {path}: {reason}")]
    MissingArtifact { path: PathBuf, reason: String },
    #[error("grid error: {0}")]
    Grid(String),
    #[error(transparent)]
    Core(#[from] sparsecmd_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::MissingArtifact { .. } => 4,
            CliError::Grid(_) => 5,
            CliError::Core(sparsecmd_core::Error::Grid(_)) => 5,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }

    /// Reclassifies a core error raised while interpreting the config.
    pub(crate) fn config(e: sparsecmd_core::Error) -> Self {
        match e {
            sparsecmd_core::Error::Grid(m) => CliError::Grid(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
