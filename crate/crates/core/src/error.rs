use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration (bad density, short rho vector, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed call arguments (dimension mismatch, empty index set, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A statistic that needs spread was handed a constant sample.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    /// The run was refused before doing any work, e.g. by the memory guard.
    #[error("refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
