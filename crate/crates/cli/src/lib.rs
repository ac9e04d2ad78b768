//! Command-line harness around `greencone`: configuration, randomized suites,
//! experiment commands and their reports.

pub mod commands;
pub mod config;
pub mod report;
pub mod suites;

use greencone::dynamics::DynamicsError;
use greencone::weak_kam::WeakKamError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mathematical failure: {0}")]
    Math(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration errors, 3 for mathematical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Math(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidArgument(_) | DynamicsError::InvalidSystem(_) => CliError::Config(e.to_string()),
            _ => CliError::Math(e.to_string()),
        }
    }
}

impl From<WeakKamError> for CliError {
    fn from(e: WeakKamError) -> Self {
        match e {
            WeakKamError::InvalidArgument(_) | WeakKamError::ResolutionMismatch { .. } => CliError::Config(e.to_string()),
            WeakKamError::Dynamics(d) => d.into(),
            _ => CliError::Math(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::Io(io),
            other => CliError::Io(std::io::Error::other(format!("{other:?}"))),
        }
    }
}
