use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not reach tolerance {tol:e} on [{lower}, {upper}] (estimate {estimate:e})")]
    QuadratureFailure {
        lower: f64,
        upper: f64,
        tol: f64,
        estimate: f64,
    },

    #[error("argument {lambda} outside the transform domain: {reason}")]
    DomainError { lambda: f64, reason: String },

    #[error("precondition violated: {0}")]
    ConditionViolated(String),

    #[error("transform at lambda = {lambda} does not decay (domain truncation diverged at X_max = {x_max})")]
    NoDecay { lambda: f64, x_max: f64 },

    #[error("grid refinement exhausted at {cells} cells (error estimate {estimate:e} > {tol:e})")]
    RefinementExhausted { cells: usize, estimate: f64, tol: f64 },

    #[error("no positive decay rate: {0}")]
    NoRoot(String),

    #[error("time grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("series truncation: {0}")]
    SeriesTruncation(String),

    #[error("expression parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors signalling that an asymptotic quantity does not exist
    /// for the given parameters (as opposed to bad input or numerical failure).
    pub fn is_precondition(&self) -> bool {
        matches!(self, Error::ConditionViolated(_) | Error::NoRoot(_))
    }
}
