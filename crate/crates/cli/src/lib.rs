//! Scenario loading and experiment dispatch behind the `ddrs` binary.

mod output;
mod runner;
pub mod scenario;

use std::fmt::Display;
use std::path::PathBuf;

use thiserror::Error;

pub use output::Artifacts;
pub use runner::{run, run_replications, Overrides, RunReport};
pub use scenario::{load_curves, load_scenario, parse_scenario, Kind, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn invalid(key: impl Into<String>, message: impl Display) -> Self {
        CliError::Invalid {
            key: key.into(),
            message: message.to_string(),
        }
    }

    pub fn runtime(message: impl Display) -> Self {
        CliError::Runtime(message.to_string())
    }

    /// Process exit status: 2 for invalid values, 4 for unreadable or
    /// unparsable files, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } => 2,
            CliError::Parse { .. } => 4,
            CliError::Io { .. } | CliError::Runtime(_) => 3,
        }
    }
}
