use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, CoreError>;

/// Errors raised by the audit core.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A dataset violates its invariants (too few rows, ragged rows, ...).
    InvalidDataset(String),
    /// A fold plan request violates `2 <= K <= n` or `L >= 1`.
    InvalidPlan(String),
    /// An index set referenced rows outside the dataset or was empty.
    InvalidSubset(String),
    /// Vector or matrix dimensions do not agree.
    DimensionMismatch { expected: usize, got: usize },
    /// Empty input where at least one value is required.
    EmptyInput(&'static str),
    /// A NaN reached a log-space reduction.
    NanInput(&'static str),
    /// An argument is outside its documented range.
    InvalidArgument(String),
    /// A model fit aborted (non-finite loss, impossible configuration, ...).
    FitFailed(String),
    /// An aggregate was requested on a table with failed fits.
    PartialTable { failed: usize },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidDataset(m) => write!(f, "invalid dataset: {m}"),
            CoreError::InvalidPlan(m) => write!(f, "invalid fold plan: {m}"),
            CoreError::InvalidSubset(m) => write!(f, "invalid subset: {m}"),
            CoreError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            CoreError::EmptyInput(what) => write!(f, "empty input: {what}"),
            CoreError::NanInput(what) => write!(f, "NaN input: {what}"),
            CoreError::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            CoreError::FitFailed(m) => write!(f, "fit failed: {m}"),
            CoreError::PartialTable { failed } => {
                write!(f, "log-probability table is partial ({failed} failed fits)")
            }
        }
    }
}
