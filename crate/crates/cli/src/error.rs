use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Numerical(#[from] gflame_core::Error),

    /// A run that completed but whose checks did not pass.
    #[error("{0}")]
    CheckFailed(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Numerical(gflame_core::Error::InvalidArgument(_)) => exit::USAGE,
            CliError::Numerical(_) | CliError::CheckFailed(_) => exit::NUMERICAL,
            CliError::Io { .. } => exit::IO,
        }
    }
}
