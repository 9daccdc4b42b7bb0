use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{0}")]
    Data(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl CliError {
    /// 1 for failed assertions, 2 for bad input or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }

    pub fn data(err: impl std::fmt::Display) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<curricula_core::scores::ScoreError> for CliError {
    fn from(e: curricula_core::scores::ScoreError) -> Self {
        CliError::data(e)
    }
}

impl From<curricula_core::design::DesignError> for CliError {
    fn from(e: curricula_core::design::DesignError) -> Self {
        CliError::data(e)
    }
}

impl From<curricula_core::anova::AnovaError> for CliError {
    fn from(e: curricula_core::anova::AnovaError) -> Self {
        CliError::data(e)
    }
}

impl From<curricula_rl::RlError> for CliError {
    fn from(e: curricula_rl::RlError) -> Self {
        CliError::data(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
