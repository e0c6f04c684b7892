//! Error type shared by every module.

use thiserror::Error;

/// Failures reported by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Adaptive quadrature hit its refinement limit before meeting tolerance.
    #[error("quadrature did not converge (last estimate {estimate:e}, error estimate {error:e})")]
    Quadrature {
        /// Best available value of the integral.
        estimate: f64,
        /// Estimated absolute error of that value.
        error: f64,
    },
    /// A root solve or other iterative scheme failed.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A requested experiment point cannot be run at desk scale.
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

/// Convenience alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
