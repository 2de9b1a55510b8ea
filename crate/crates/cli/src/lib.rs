//! Library surface of the batch tool, so the runner and report pipeline are
//! testable without spawning the binary.

pub mod config;
pub mod reports;
pub mod runner;

use thiserror::Error;

/// Exit-code taxonomy: validation failures exit 1 (before side effects),
/// runtime failures exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}
