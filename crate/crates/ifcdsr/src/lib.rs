//! Command-line layer: file formats, configuration, dataset preparation and
//! the `synth`, `prepare`, `train`, `eval` and `ablate` commands.

use std::fs;
use std::path::Path;

pub mod catalog_file;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod interactions;
pub mod parallel;
pub mod report;
pub mod trainlog;

pub use error::{AppError, Result};

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}
