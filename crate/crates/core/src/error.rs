use std::io;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An evaluator was handed cells its behavioral model does not cover.
    #[error("unsupported ownership: {0}")]
    UnsupportedOwnership(String),

    /// Two partial score matrices claimed the same cell.
    #[error("cell ({row}, {col}) assigned to more than one evaluator")]
    OverlappingCells { row: usize, col: usize },

    /// No applicant had all of its attributes evaluated.
    #[error("no fully evaluated applicant")]
    NothingEvaluated,

    /// A configuration key or value was rejected.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
