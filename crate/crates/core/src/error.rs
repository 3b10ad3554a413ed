use std::path::PathBuf;

use thiserror::Error;

/// Every failure carries a machine-readable category via [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate schedule: {0}")]
    DegenerateSchedule(String),

    #[error("index error: timestep {index} outside 1..={len}")]
    Index { index: usize, len: usize },

    /// A plan or conversion touched a timestep with zero cumulative signal.
    #[error("zero-terminal-SNR collapse: {0}")]
    Collapse(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("empty point cloud: no pixel carries a valid depth")]
    EmptyCloud,

    #[error("no visible source: {targets} occluded positions but the sampling mask is empty")]
    NoVisibleSource { targets: usize },

    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncation { expected: u64, found: u64 },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("config error at key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::Parameter(_) => "parameter",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::DegenerateSchedule(_) => "degenerate_schedule",
            Error::Index { .. } => "index",
            Error::Collapse(_) => "collapse",
            Error::DivisionByZero(_) => "division_by_zero",
            Error::EmptyCloud => "empty_cloud",
            Error::NoVisibleSource { .. } => "no_visible_source",
            Error::Format { .. } => "format",
            Error::Truncation { .. } => "truncation",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
