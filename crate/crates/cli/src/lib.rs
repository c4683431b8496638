//! The `heartml` command-line workflow: train, tune, evaluate, predict and
//! figure-data export over the heart-disease table.

pub mod commands;
pub mod error;
pub mod model_file;

use std::fs;
use std::path::Path;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult, ExitKind};
pub use model_file::ModelFile;

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(stage: &'static str, path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(stage, dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(stage, path, e))
}
