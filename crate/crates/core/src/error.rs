use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no weak-learners: every feature is constant")]
    EmptyBasis,

    #[error("learner index {index} out of range (K = {count})")]
    LearnerOutOfRange { index: usize, count: usize },

    #[error("group {0} is empty or does not exist")]
    EmptyGroup(usize),

    #[error("exhaustive enumeration over {subsets} subsets is too large; use the selection pmf instead")]
    EnumerationTooLarge { subsets: u128 },

    #[error("input exceeds desk-scale limit: {0}")]
    TooLarge(String),

    #[error("model format: {0}")]
    Model(String),
}
