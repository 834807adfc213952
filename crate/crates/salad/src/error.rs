//! Driver-level errors and their process exit codes.

use thiserror::Error;

/// Exit code classes: 0 success, 1 failed check, 2 configuration,
/// 3 parse, 4 IO/runtime.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("series has {len} points but the schedule needs more than {min}")]
    SeriesTooShort { len: usize, min: usize },
    #[error(transparent)]
    Core(#[from] salad_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::SeriesTooShort { .. } => 2,
            Error::Parse { .. } | Error::Json(_) => 3,
            Error::Core(_) | Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
