use thiserror::Error;

/// Errors raised by the bound, oracle and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Argument lies outside the range where the quantity is defined or claimed.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{operation} does not support the {law} law")]
    UnsupportedLaw {
        operation: &'static str,
        law: &'static str,
    },

    #[error("numeric failure in {context}: {detail} (last value {last})")]
    NumericFailure {
        context: &'static str,
        detail: String,
        last: f64,
    },

    /// Partial-fraction coefficients too large to trust.
    #[error("ill-conditioned mixture: sum of |coef| = {coef_abs_sum:e}")]
    IllConditioned { coef_abs_sum: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
