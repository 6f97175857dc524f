//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A group required by a constraint evaluation has no rows. The balanced
    /// sampler guarantees nonempty groups, so hitting this indicates a
    /// pipeline bug upstream.
    #[error("group {group} has no rows in the batch or split")]
    EmptyGroup { group: usize },

    #[error("group id {group} out of range for group_count {group_count}")]
    GroupOutOfRange { group: usize, group_count: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    CsvFormat { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }

    /// Configuration problems get exit code 1 in the CLI; everything else is
    /// a runtime failure (exit code 2).
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
