use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    Shape {
        context: String,
        expected: String,
        found: String,
    },

    #[error("stale or mismatched layer cache: {0}")]
    StaleCache(String),

    #[error("non-finite {what} in parameter block `{block}`")]
    NonFinite { what: &'static str, block: String },

    #[error("non-finite loss at {phase} epoch {epoch} batch {batch}")]
    NonFiniteLoss { phase: String, epoch: usize, batch: usize },

    #[error("invalid label `{0}`: expected 0 or 1")]
    InvalidLabel(String),

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("not enough groups: {groups} distinct {kind} ids for {folds} folds")]
    TooFewGroups {
        kind: &'static str,
        groups: usize,
        folds: usize,
    },

    #[error("phase ordering violated: {0}")]
    PhaseOrder(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("schema hash mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.into(),
            found: found.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
