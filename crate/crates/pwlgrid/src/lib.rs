//! File formats, experiment harness and command-line support for
//! `pwlgrid-core`.

pub mod config;
pub mod experiment;
pub mod formats;
pub mod matpower;
pub mod mps;
pub mod pipeline;
pub mod ucfile;

use thiserror::Error;

/// Errors raised while reading or writing project files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid content: {0}")]
    Invalid(String),
    #[error("toml: {0}")]
    Toml(String),
}

impl FormatError {
    pub fn at(line: usize, msg: impl Into<String>) -> FormatError {
        FormatError::Parse { line, msg: msg.into() }
    }
}
