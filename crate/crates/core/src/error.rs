use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected n={expected}, p={expected_p}, got n={got}, p={got_p}")]
    DimensionMismatch {
        expected: usize,
        expected_p: usize,
        got: usize,
        got_p: usize,
    },

    #[error("index {index} out of range 0..={max}")]
    OutOfRange { index: usize, max: usize },

    #[error("budget exceeded: {what} needs {needed}, cap is {cap}")]
    BudgetExceeded { what: &'static str, needed: u128, cap: u128 },

    #[error("function is not finite at likelihood ratio {at}")]
    NonFinite { at: f64 },

    #[error("series did not converge in {terms} terms: partial sum {partial}, tail bound {bound}")]
    SeriesNotConverged { terms: usize, partial: f64, bound: f64 },

    #[error("operation unsupported: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
