pub mod fit;
pub mod phases;
pub mod report;
pub mod simulate;

use crate::artifacts::{write_bytes, RunPaths};
use crate::config::RunConfig;
use crate::error::CliError;

/// Create the run directory and drop the fully resolved config next to the
/// outputs. Every stage does this, so the artifact always matches the last
/// stage that ran.
pub(crate) fn prepare_run(config: &RunConfig) -> Result<RunPaths, CliError> {
    config.validate()?;
    let paths = RunPaths::new(&config.out_dir);
    std::fs::create_dir_all(&paths.root).map_err(|e| CliError::io(&paths.root, e))?;
    write_bytes(&paths.resolved_config(), config.to_toml()?.as_bytes())?;
    Ok(paths)
}
