use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("unknown station `{station}` referenced by `{field}`")]
    UnknownStation { station: String, field: String },
    #[error("malformed curve: {0}")]
    MalformedCurve(String),
    #[error("non-finite generalized cost for stream {stream}, interval {interval}, mode {mode}")]
    NonFiniteCost {
        stream: usize,
        interval: usize,
        mode: &'static str,
    },
    #[error("decision vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}
