//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model construction, estimation and the ECG pipeline.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Invalid hyperparameters or inconsistent dimensions.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A recursion produced a non-finite or otherwise unusable value.
    #[error("numerical failure at step {step}: {reason}")]
    Numerical { step: usize, reason: String },

    /// An iterative solver ran out of iterations.
    #[error("solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    /// Segmentation needs at least three R peaks.
    #[error("too few R peaks: found {found}, need at least {needed}")]
    TooFewPeaks { found: usize, needed: usize },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn numerical(step: usize, reason: impl Into<String>) -> Self {
        Error::Numerical {
            step,
            reason: reason.into(),
        }
    }
}
