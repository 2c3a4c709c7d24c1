use thiserror::Error;

/// Errors raised by the library. The variants fall into two families,
/// domain errors (bad inputs or preconditions) and numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("step control collapsed before classification: {0}")]
    ToleranceNotMet(String),
    #[error("profile could not be classified before the safety horizon (u = {horizon_u:e})")]
    Unclassified { horizon_u: f64 },
    #[error("enumeration exceeds the size limit of {limit} leaves")]
    SizeLimit { limit: u64 },
    #[error("only {hits} raw survivals (need at least {needed}); use the splitting estimator")]
    InsufficientHits { hits: u64, needed: u64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a numerical method (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::ToleranceNotMet(_)
                | Error::Unclassified { .. }
                | Error::DegenerateFit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
