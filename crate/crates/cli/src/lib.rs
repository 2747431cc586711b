//! Command-line orchestration: configuration, stage runners, run manifests
//! and map rendering on top of `gridsync_core`.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod render;

use std::path::{Path, PathBuf};

pub use config::{Overrides, RunConfig};
pub use pipeline::{execute, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<gridsync_core::Error> for CliError {
    fn from(e: gridsync_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Directory holding the bundled 8x8 fixture and its configs.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
