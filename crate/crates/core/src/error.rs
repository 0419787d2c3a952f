use thiserror::Error;

/// Errors raised by the solvers and model validators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or argument violates one of its invariants. `path` names the
    /// first offending field.
    #[error("invalid {path}: {reason}")]
    Invalid { path: String, reason: String },

    /// A base policy is required to have finite cost but does not.
    #[error("base policy is unstable: {0}")]
    UnstableBase(String),

    /// The starting coefficient lies outside the region of stability.
    #[error("coefficient {0} is outside the region of stability")]
    OutsideStabilityRegion(f64),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
