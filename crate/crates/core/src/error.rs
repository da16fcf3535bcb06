use thiserror::Error;

use crate::dwell::Family;
use crate::sequences::State;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid {family} parameters: {message}")]
    InvalidParameters { family: Family, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("zero-variance sample")]
    ZeroVariance,

    #[error(
        "{family} fit did not converge after {iterations} iterations \
         (best log-likelihood {best_log_likelihood}, params {best_params:?})"
    )]
    NonConvergence {
        family: Family,
        iterations: usize,
        best_params: Vec<f64>,
        best_log_likelihood: f64,
    },

    #[error("no dwell distribution fitted for state {0}")]
    UnfitDwell(State),

    #[error("all candidate families failed to fit")]
    AllFitsFailed,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("non-finite feature value")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("SMO did not converge after {iterations} iterations (max violation {violation:e})")]
    SvmNonConvergence { iterations: usize, violation: f64 },

    /// A cross-validation fold whose training step failed.
    #[error("fold failed: {0}")]
    FoldFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed inputs rather than by a failed
    /// computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidInput(_)
                | Error::InvalidParameters { .. }
                | Error::Json(_)
                | Error::Csv(_)
                | Error::EmptySequence
        )
    }
}
