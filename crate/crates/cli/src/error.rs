use std::path::PathBuf;

use thiserror::Error;
use vodsim_core::sim::SimError;
use vodsim_core::workload::WorkloadError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read `{}`", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse `{}`", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("workload: {0}")]
    Workload(#[from] WorkloadError),
    #[error("scenario `{scenario}` failed")]
    Run { scenario: String, source: SimError },
    #[error("cannot write `{}`", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot encode results: {0}")]
    Encode(String),
}

impl CliError {
    /// Process exit code: 1 for anything wrong with the input, 2 for
    /// failures while running or writing results.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Parse { .. } | CliError::Workload(_) => 1,
            CliError::Run { .. } | CliError::Write { .. } | CliError::Encode(_) => 2,
        }
    }
}
