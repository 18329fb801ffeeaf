use alloc::string::String;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation failed to produce a finite or converged value.
    #[error("numeric error: {message} (achieved {achieved:e})")]
    Numeric { message: String, achieved: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            achieved,
        }
    }
}
