//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library. The CLI maps these onto exit codes, so the
/// split between configuration problems ([`Error::InvalidConfig`],
/// [`Error::DimensionMismatch`], ...) and data-quality problems
/// ([`Error::Uncalibratable`]) is part of the public contract.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong width for the operation.
    #[error("dimension mismatch at {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    /// A computation produced a non-finite value. `index` is the first
    /// offending coordinate.
    #[error("non-finite value in {context} at coordinate {index}")]
    NonFinite { context: String, index: usize },

    /// The zero vector cannot be decomposed into magnitude and direction.
    #[error("zero target has no direction")]
    ZeroTarget,

    /// An operation that needs at least one element got none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Configuration rejected before any work started.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Scores cannot support calibration (e.g. all uncertainty values zero).
    #[error("uncalibratable: {0}")]
    Uncalibratable(String),

    /// Training produced a non-finite loss; carries the location diagnostics.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    TrainingDiverged { epoch: usize, batch: usize },

    /// The trained classifier predicts a single class everywhere, so no
    /// decision boundary exists.
    #[error("degenerate classifier: a single class is predicted everywhere")]
    DegenerateClassifier,

    /// Malformed tabular data; `line` is 1-based and counts the header.
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: u64, message: String },

    /// Header row did not match the expected schema.
    #[error("csv header mismatch: expected {expected}, found {found}")]
    CsvHeader { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
