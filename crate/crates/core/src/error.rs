use thiserror::Error;

/// Errors raised by the solvers and their inputs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes do not line up (non-square input, mismatched products, ...).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested power budget cannot be met under the given constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Non-finite values appeared during a computation.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A channel descriptor or option document could not be interpreted.
    #[error("invalid descriptor: {0}")]
    Descriptor(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(format!($($arg)*)) };
}

macro_rules! dimension {
    ($($arg:tt)*) => { $crate::error::Error::Dimension(format!($($arg)*)) };
}

pub(crate) use dimension;
pub(crate) use domain;
