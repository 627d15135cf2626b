//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Riccati fixed-point iteration did not settle (unstabilizable or
    /// ill-conditioned process draw).
    #[error("steady-state covariance did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid schedule action: {0}")]
    InvalidAction(String),

    #[error("state space too large for exhaustive solve: {states} states (limit {limit})")]
    Capacity { states: u128, limit: u128 },

    #[error("policy has no action for state {0}")]
    IncompletePolicy(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient encountered")]
    NonFiniteGradient,

    #[error("non-finite loss encountered: {0}")]
    NonFiniteLoss(f64),

    #[error("system generation failed after {0} redraws")]
    GenerationFailure(usize),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Domain(_) | Error::Capacity { .. } => 2,
            Error::NonFiniteGradient | Error::NonFiniteLoss(_) => 3,
            Error::IncompletePolicy(_) | Error::Certification(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
