//! Application errors with the stable exit-code contract: 0 success,
//! 2 invalid input or configuration, 3 runtime failure.

use mixclust_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Input(_) | AppError::Json(_) => 2,
            AppError::Io(_) => 2,
            AppError::Runtime(_) => 3,
            AppError::Core(e) => match e {
                CoreError::TrainingDiverged(_) => 3,
                _ => 2,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
