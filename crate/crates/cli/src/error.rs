//! Command-line error type and exit-code mapping: 0 success, 2 for schema
//! and config errors, 3 for training divergence. Scoring anomalies (absent
//! regions, unparseable answers) are reported in the output and never
//! change the exit code.

use std::path::Path;

use tarpo_core::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: schema error: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },
    #[error("missing dataset record for transcript id {0:?}")]
    MissingRecord(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn schema(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sim(SimError::DivergenceDetected { .. }) => 3,
            _ => 2,
        }
    }
}
