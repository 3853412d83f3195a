use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its admissible domain (e.g. `epsilon <= -1`).
    #[error("domain error: {0}")]
    Domain(String),

    /// The Fock-space series does not converge, or no certified truncation
    /// was found below the hard cap.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Finite-difference derivative estimates disagree.
    #[error("derivative instability: {0}")]
    DerivativeInstability(String),

    /// An observed outcome has (numerically) zero probability under the model.
    #[error("outcome {outcome} outside the model support at epsilon = {epsilon}")]
    OutOfSupport { outcome: usize, epsilon: f64 },

    /// Too many Monte Carlo replications failed.
    #[error("benchmark failed: {0}")]
    Benchmark(String),
}

pub type Result<T> = std::result::Result<T, Error>;
