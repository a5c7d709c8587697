//! Error type shared across the crate.
//!
//! The CLI maps variants to process exit codes: [`Error::MissingCheckpoint`]
//! exits 2, [`Error::MalformedJsonl`] exits 3, everything else exits 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: malformed JSONL record: {message}")]
    MalformedJsonl {
        path: String,
        line: usize,
        message: String,
    },

    #[error("checkpoint not found: {0}")]
    MissingCheckpoint(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "non-finite loss at step {step}: L={total} \
         (ce={ce}, elbo={elbo}, sal={sal}, top={top})"
    )]
    NonFiniteLoss {
        step: usize,
        total: f64,
        ce: f64,
        elbo: f64,
        sal: f64,
        top: f64,
    },

    #[error("metric error: {0}")]
    Metric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
