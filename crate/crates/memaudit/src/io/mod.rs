//! File formats and data plumbing: CSV and IDX ingestion, synthetic data
//! generation, image preprocessing transforms, and report persistence.

pub mod csv;
pub mod idx;
pub mod report;
pub mod synth;
pub mod transforms;

use memaudit_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("{0}")]
    Core(CoreError),
}

impl From<::csv::Error> for IoError {
    fn from(e: ::csv::Error) -> IoError {
        IoError::Format(e.to_string())
    }
}

impl From<CoreError> for IoError {
    fn from(e: CoreError) -> IoError {
        IoError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, IoError>;
