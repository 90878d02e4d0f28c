//! Crate-wide error type and result alias.

use std::fmt;
use std::io;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped by origin: caller mistakes (bad arguments, malformed
/// input files) versus internal failures (I/O, serialization). The CLI maps
/// the former to exit code 1 and the latter to exit code 2.
#[derive(Debug)]
pub enum Error {
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// Array or tensor dimensions do not line up.
    ShapeMismatch(String),
    /// A value that must be finite is NaN or infinite.
    NonFinite(String),
    /// Timestamps are not strictly increasing.
    NonMonotone(String),
    /// A required CSV column is missing from the header.
    MissingColumn(String),
    /// A CSV cell could not be parsed as the expected type.
    Format(String),
    /// An interpolation query lies outside the covered time range.
    OutOfRange { query: f64, lo: f64, hi: f64 },
    /// The operation needs a non-empty collection.
    Empty(String),
    /// The optimizer was stepped without freshly computed gradients.
    StaleGradients,
    /// A checkpoint file is malformed or has an unsupported version.
    Checkpoint(String),
    /// A sweep job failed; names the fold and grid cell for diagnosis.
    Sweep {
        fold: String,
        cell: String,
        source: Box<Error>,
    },
    Io(io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error stems from caller-supplied input rather than an
    /// internal failure.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::ShapeMismatch(_)
            | Error::NonFinite(_)
            | Error::NonMonotone(_)
            | Error::MissingColumn(_)
            | Error::Format(_)
            | Error::OutOfRange { .. }
            | Error::Empty(_)
            | Error::Checkpoint(_) => true,
            Error::Sweep { source, .. } => source.is_user_error(),
            Error::StaleGradients | Error::Io(_) | Error::Csv(_) | Error::Json(_) => false,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::NonMonotone(msg) => write!(f, "timestamps not strictly increasing: {msg}"),
            Error::MissingColumn(name) => write!(f, "missing column: {name}"),
            Error::Format(msg) => write!(f, "malformed input: {msg}"),
            Error::OutOfRange { query, lo, hi } => {
                write!(f, "query time {query} outside covered range [{lo}, {hi}]")
            }
            Error::Empty(msg) => write!(f, "empty input: {msg}"),
            Error::StaleGradients => {
                write!(f, "optimizer step requested without fresh gradients")
            }
            Error::Checkpoint(msg) => write!(f, "bad checkpoint: {msg}"),
            Error::Sweep { fold, cell, source } => {
                write!(f, "sweep job failed (fold {fold}, cell {cell}): {source}")
            }
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Csv(e) => write!(f, "csv error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Csv(e) => Some(e),
            Error::Json(e) => Some(e),
            Error::Sweep { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
