//! Error type shared across the crate.

use std::time::Duration;

/// Errors produced by polclust operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A Stokes vector was not pure enough to place on the sphere surface.
    #[error("state purity {purity} departs from 1 beyond tolerance")]
    DegradedPurity { purity: f64 },

    /// Reference-state construction only covers 1..=6 clusters.
    #[error("unsupported cluster count {0} (supported range is 1..=6)")]
    UnsupportedK(usize),

    /// Success-ratio evaluation requires ground-truth labels on every point.
    #[error("evaluation unavailable: dataset has no complete ground-truth labels")]
    EvaluationUnavailable,

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Datasets are limited to two feature columns.
    #[error("unsupported feature dimension {0} (expected 2)")]
    UnsupportedDimension(usize),

    /// Could not reach or keep a connection to a device endpoint.
    #[error("connection failure: {0}")]
    Connection(String),

    /// The remote peer violated the wire protocol.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// A device request did not complete in time.
    #[error("device request timed out after {0:?}")]
    Timeout(Duration),

    /// The device answered with an error response.
    #[error("device error [{code}]: {detail}")]
    Device { code: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
