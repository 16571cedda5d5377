use std::io;
use std::path::PathBuf;

use thiserror::Error;
use wikilink_core::ErrorCategory;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] wikilink_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Io { .. } => ErrorCategory::Io,
            CliError::Config(_) => ErrorCategory::Validation,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Parse => 3,
            ErrorCategory::Validation => 4,
            ErrorCategory::Io => 5,
            ErrorCategory::Numeric => 6,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(source: io::Error) -> Self {
        CliError::Core(wikilink_core::Error::Io(source))
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
