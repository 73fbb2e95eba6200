use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the runner, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Model(#[from] stickysim_core::Error),

    #[error("{0}")]
    Threshold(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config {path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// 0 success, 1 invalid input, 2 numerical failure, 3 compare threshold.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical() => 2,
            CliError::Threshold(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
