use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::formats::FormatError;

/// Failure of a subcommand. Each kind has a fixed process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("malformed input {}: {error}", path.display())]
    Malformed { path: PathBuf, error: FormatError },
    #[error("malformed input: {0}")]
    Invalid(String),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Estimation(_) => 3,
            Self::Malformed { .. } | Self::Invalid(_) => 4,
            Self::Write { .. } => 1,
        }
    }

    pub(crate) fn malformed(path: &Path, error: FormatError) -> Self {
        Self::Malformed {
            path: path.to_owned(),
            error,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
