//! Command-line front end for the `tierprice` library.
//!
//! Subcommands read cell-share CSV files, compute experiment statistics,
//! estimate the demand model, optimize prices and run the bundled scenario
//! pipelines. Reports render as text tables or JSON (see [`REPORT_SCHEMA`]).

pub mod args;
pub mod commands;
pub mod config;
pub mod reference;
pub mod render;

use thiserror::Error;

pub use args::{Cli, Command};
pub use commands::{execute, run, Output, Report};

/// JSON schema every `--format json` report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tierprice::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed JSON input: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 3 for numerical non-convergence, 1 for I/O failures, 2 for everything
    /// caused by the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(tierprice::Error::Io(_)) | CliError::Io(_) => 1,
            _ => 2,
        }
    }
}
