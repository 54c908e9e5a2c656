//! Batch front end for `gfpk-core`: a strict TOML run configuration, one
//! mode per invocation, JSON reports and CSV tables in an output directory.
//!
//! Exit codes: 0 when every asserted check passes, 1 when a check fails,
//! 2 for configuration errors (nothing is written), 3 for solver errors.

// `!(x > 0.0)` style guards are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod report;
mod run;

pub use config::{Mode, RunConfig};
pub use report::{Check, RunReport, TraceSummary};
pub use run::{execute, RunOutcome};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] gfpk_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(_) | CliError::Io { .. } => EXIT_SOLVER,
        }
    }
}
