use std::path::PathBuf;

use fbd::data::DataError;
use fbd::eval::EvalError;
use fbd::trainer::{CheckpointError, TrainError};
use thiserror::Error;

/// Everything a command can fail with. [`CliError::exit_code`] maps each
/// class onto the scripting contract: 2 for user or config mistakes, 1 for
/// everything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: file not found", .0.display())]
    MissingInput(PathBuf),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no metric records found under {}", .0.display())]
    EmptyResults(PathBuf),
    #[error("{failed} of {total} sweep cells failed; see the FAILED cells in the results table")]
    PartialFailure { failed: usize, total: usize },
    #[error("gradient check failed for: {0}")]
    GradcheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::MissingInput(_) | CliError::EmptyResults(_) => 2,
            CliError::Data(_) => 2,
            CliError::Train(TrainError::InvalidConfig(_) | TrainError::EmptySplit) => 2,
            CliError::Checkpoint(CheckpointError::Io { .. } | CheckpointError::BadMagic) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
