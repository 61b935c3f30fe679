use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A certified comparison could not be decided even after the
    /// precision-doubling cap was reached.
    #[error("precision fault: {0}")]
    PrecisionFault(String),

    /// A certified inequality that the theory guarantees came out false.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("reduction failed for {label} after {advances} convergent advances")]
    ReductionFailed { label: String, advances: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
