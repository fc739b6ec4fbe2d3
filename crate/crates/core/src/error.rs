//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A point or matrix did not have the expected number of columns.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Not enough rows (or not enough distinct rows) for the operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A linear solve or other floating-point computation failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A search bracket could not contain the optimum.
    #[error("bracket failure: {0}")]
    Bracket(String),

    /// Iterative optimization hit its iteration budget before converging.
    #[error("no convergence: worst optimality violation {violation:.3e} after {iterations} updates")]
    NonConvergence { violation: f64, iterations: usize },

    /// A geometry sampler could not produce valid output.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The caller passed an argument outside the supported range.
    #[error("invalid argument: {0}")]
    Usage(String),

    /// Malformed input data (CSV rows, model files). Line numbers are 1-based.
    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    /// A persisted model could not be understood.
    #[error("model format: {0}")]
    ModelFormat(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
