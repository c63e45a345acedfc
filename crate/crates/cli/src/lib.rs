//! Config-driven experiment runner for `regdist-core`.
//!
//! Every subcommand reads an optional TOML config, writes one result table
//! (`<out>/<subcommand>.csv` or `.json`) and a manifest
//! (`<out>/<subcommand>.manifest.json`) with the config hash, seed, tool
//! version and wall time.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod run;
pub mod table;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),

    #[error("config is missing the `{0}` section or key")]
    Missing(&'static str),

    #[error("unsupported input: {0}")]
    Unsupported(&'static str),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] regdist_core::Error),
}

pub use run::{run, Command, RunOptions, RunReport};
