use thiserror::Error;

/// Errors raised by the library. `Invalid` means the caller broke a
/// precondition; every other variant is a numerical failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("newton iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("ode integration failed at t = {t}: {reason}")]
    Ode { t: f64, reason: String },
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
}

impl Error {
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Invalid(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
