use crate::month::Month;
use thiserror::Error;

/// Coarse classification used to pick the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid configuration or flag combination, detected before any computation.
    Usage,
    /// Input data does not support the requested computation.
    Data,
    /// A numerical procedure failed on otherwise valid data.
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numerical => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid month `{0}`, expected YYYY-MM")]
    InvalidMonth(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("missing mandatory column `{0}` in input header")]
    MissingColumn(String),

    #[error("all {rejected} records were rejected; panel is empty")]
    EmptyPanel { rejected: usize },

    #[error("month {0} not present in panel")]
    MissingMonth(Month),

    #[error("index undefined: empty matched set for months {t0} and {t1}")]
    UndefinedIndex { t0: Month, t1: Month },

    #[error("broken chain: empty matched set between {t0} and {t1}")]
    BrokenChain { t0: Month, t1: Month },

    #[error("missing multilateral link: empty matched set for window months {a} and {b}")]
    MissingLink { a: Month, b: Month },

    #[error(
        "fixed point did not converge within {iterations} iterations (last residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular regression design; dependent columns: {}", columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("window requires base december {0}, which is missing from the panel")]
    MissingBaseDecember(Month),

    #[error("insufficient back data: first missing month is {0}")]
    InsufficientBackData(Month),

    #[error("cells missing a value at {month}: {}", cells.join(", "))]
    MissingCells { month: Month, cells: Vec<String> },

    #[error("non-finite index value produced for {0}")]
    NonFiniteValue(Month),

    #[error("match table import: {0}")]
    MatchTableImport(String),

    #[error("{path}: {source}")]
    Input { path: std::path::PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::Parameter(_) => ErrorClass::Usage,
            Error::UndefinedIndex { .. }
            | Error::BrokenChain { .. }
            | Error::MissingLink { .. }
            | Error::NonConvergence { .. }
            | Error::SingularDesign { .. }
            | Error::NonFiniteValue(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
