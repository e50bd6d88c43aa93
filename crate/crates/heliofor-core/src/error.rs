use alloc::boxed::Box;
use alloc::string::String;

use crate::linear::ArmaModel;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An operation that needs at least one sample got none.
    #[error("empty input")]
    EmptyInput,
    /// The series or dataset is too short for the requested operation.
    #[error("insufficient data: need at least {required} rows, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    /// Vector or matrix sizes disagree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    /// A configuration value is outside its legal range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    /// A record violates the ingestion invariants.
    #[error("invalid data at row {row}: {reason}")]
    InvalidData { row: usize, reason: String },
    /// The normal equations have no unique solution.
    #[error("rank-deficient design matrix")]
    RankDeficient,
    /// Iterative optimization ran out of budget. Carries the best
    /// parameters seen so far so callers can inspect or reuse them.
    #[error("optimizer did not converge within {iterations} iterations")]
    NotConverged { iterations: usize, best: Box<ArmaModel> },
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    /// Every draw of a randomized search failed.
    #[error("all {attempted} search draws failed")]
    AllDrawsFailed { attempted: usize },
}
