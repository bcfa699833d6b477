//! IO companion to `pipegrad-core`: CSV ingestion, schema sidecars, the
//! versioned pipeline/network JSON formats, reports, and the command
//! implementations behind the `pipegrad` binary.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod formats;

use std::process::ExitCode;

/// Command outcomes map onto process exit codes: 0 success, 2 config/file
/// error, 3 training divergence, 4 fidelity failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("fidelity failure: {0}")]
    Fidelity(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Divergence(_) => ExitCode::from(3),
            CliError::Fidelity(_) => ExitCode::from(4),
            CliError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json error: {e}"))
    }
}

impl From<pipegrad_core::data::DataError> for CliError {
    fn from(e: pipegrad_core::data::DataError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<pipegrad_core::pipeline::GraphError> for CliError {
    fn from(e: pipegrad_core::pipeline::GraphError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<pipegrad_core::pipeline::scenarios::FitError> for CliError {
    fn from(e: pipegrad_core::pipeline::scenarios::FitError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<pipegrad_core::translate::TranslateError> for CliError {
    fn from(e: pipegrad_core::translate::TranslateError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<pipegrad_core::net::NetError> for CliError {
    fn from(e: pipegrad_core::net::NetError) -> Self {
        match e {
            pipegrad_core::net::NetError::Divergence(step) => {
                CliError::Divergence(format!("divergence at step {step}"))
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<pipegrad_core::eval::EvalError> for CliError {
    fn from(e: pipegrad_core::eval::EvalError) -> Self {
        CliError::Internal(e.to_string())
    }
}
