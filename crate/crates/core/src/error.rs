use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An iterative estimate did not settle. `value` is the last estimate and
    /// is still returned so callers can decide whether it is usable.
    #[error("{what} did not converge: estimate {value} with error {error_estimate:e} (tolerance {tolerance:e})")]
    NonConvergent {
        what: String,
        value: f64,
        error_estimate: f64,
        tolerance: f64,
    },

    #[error("degenerate action gap {gap:e} (error estimate {error:e}); no period threshold exists")]
    DegenerateGap { gap: f64, error: f64 },

    #[error("one-form {0} is not supported here")]
    UnsupportedForm(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn non_convergent(
        what: impl Into<String>,
        value: f64,
        error_estimate: f64,
        tolerance: f64,
    ) -> Self {
        Error::NonConvergent {
            what: what.into(),
            value,
            error_estimate,
            tolerance,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
