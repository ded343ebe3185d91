//! Command-line front end: configuration, scenario runs, studies and the
//! verification table, with CSV / JSON / plain-text output.

// `!(x < y)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(#[from] chflow::Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 1 solver (or output) failure, 2 config error, 3 verification failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}
