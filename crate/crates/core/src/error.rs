//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model validation, noise generation, the implicit
/// solver and the Monte Carlo harness.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter violates a structural constraint (sign, range, regime).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The implicit solver exhausted its iteration budget. The best
    /// bracket found so far is reported for diagnostics.
    #[error("root solve did not converge after {iterations} iterations; bracket [{lo:e}, {hi:e}]")]
    IterationLimit {
        iterations: usize,
        lo: f64,
        hi: f64,
    },

    /// A simulated path could not be continued.
    #[error("path aborted at step {step}: {reason}")]
    PathAborted { step: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
