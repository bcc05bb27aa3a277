use std::path::Path;
use thiserror::Error;

/// Failures grouped by exit code: configuration problems (1), missing or
/// unreadable data (2), numerical failures (3).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> CliError {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<fanox::FitError> for CliError {
    fn from(e: fanox::FitError) -> Self {
        use fanox::FitError::*;
        match e {
            NoConvergence { .. } | PoleInRange(_) | DegenerateNormalization(_) => {
                CliError::Numerical(e.to_string())
            }
            TooFewPoints { .. } | DegenerateWeights(_) | InvalidInput(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<fanox::PhaseError> for CliError {
    fn from(e: fanox::PhaseError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<fanox::SpectrumError> for CliError {
    fn from(e: fanox::SpectrumError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<fanox::ModelError> for CliError {
    fn from(e: fanox::ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}
