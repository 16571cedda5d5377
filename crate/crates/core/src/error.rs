use std::fmt;

use thiserror::Error;

/// Coarse error class used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Parse,
    Validation,
    Io,
    Numeric,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Parse => "parse",
            ErrorCategory::Validation => "validation",
            ErrorCategory::Io => "io",
            ErrorCategory::Numeric => "numeric",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate node id {id}")]
    DuplicateNode { id: u64, line: u64 },

    #[error("line {line}: label {value:?} is not 0 or 1")]
    LabelDomain { line: u64, value: String },

    #[error("pair {pair_id}: node {node_id} not found in node table")]
    MissingNode { pair_id: String, node_id: u64 },

    #[error("pair {pair_id} has no label")]
    Unlabeled { pair_id: String },

    #[error("duplicate pair id {pair_id}")]
    DuplicatePair { pair_id: String },

    #[error(
        "prediction/gold id sets differ ({total} ids): only in predictions {only_predictions:?}, only in gold {only_gold:?}"
    )]
    Coverage {
        only_predictions: Vec<String>,
        only_gold: Vec<String>,
        total: usize,
    },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parse { .. } | Error::Model(_) => ErrorCategory::Parse,
            Error::DuplicateNode { .. }
            | Error::LabelDomain { .. }
            | Error::MissingNode { .. }
            | Error::Unlabeled { .. }
            | Error::DuplicatePair { .. }
            | Error::Coverage { .. }
            | Error::EmptyTrainingSet
            | Error::Config(_) => ErrorCategory::Validation,
            Error::NonFinite { .. } => ErrorCategory::Numeric,
            Error::Io(_) => ErrorCategory::Io,
        }
    }

    pub(crate) fn parse(line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::parse(line, format!("{kind:?}")),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
