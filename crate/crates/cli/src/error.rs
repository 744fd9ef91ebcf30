use std::fmt;

use serde_json::json;

use crate::config::ConfigError;

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    NonConvergence(String),
    Io(String),
    /// A check ran but did not pass (selftest).
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Failed(_) => "check-failed",
            CliError::Config(_) => "config",
            CliError::NonConvergence(_) => "non-convergence",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::NonConvergence(m) | CliError::Io(m) | CliError::Failed(m) => m,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "exit_code": self.exit_code(), "message": self.message() } })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<lattice_multipliers::Error> for CliError {
    fn from(e: lattice_multipliers::Error) -> Self {
        use lattice_multipliers::Error as E;
        let msg = e.to_string();
        match e {
            E::NonConvergence { .. } => CliError::NonConvergence(msg),
            E::Io(_) | E::Csv(_) => CliError::Io(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}
