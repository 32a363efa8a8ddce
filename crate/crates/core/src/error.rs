use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

use crate::probes::ProbeState;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition of an operation does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The training loss became NaN/Inf. Carries the last parameters that
    /// produced a finite loss.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize, last_state: Box<ProbeState> },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
