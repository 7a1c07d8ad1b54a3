use thiserror::Error;

/// Errors raised by the library. Every variant carries enough context to
/// point at the offending input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KacError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("x and y must differ (got {0})")]
    CoincidentPoints(f64),

    #[error("query outside the closed-form validity domain: {0}")]
    OutOfDomain(String),

    #[error("rho0 == rho1: no closed form, use the integral-equation oracle")]
    DegenerateEqualRho,

    #[error("repulsion-only model: level y is not reached with probability one")]
    RepulsionOnly,

    #[error("no closed form for regime {0}")]
    UnsupportedRegime(String),

    #[error("parameter `{name}` = {value} is a pole of the hypergeometric series")]
    Pole { name: &'static str, value: f64 },

    #[error("series did not converge after {terms_used} terms")]
    NotConverged { terms_used: usize },

    #[error("iteration did not contract after {iterations} sweeps (last change {change:e})")]
    NonContraction { iterations: usize, change: f64 },

    #[error("no invariant probability measure exists for this model")]
    NoInvariantMeasure,

    #[error("time {t} lies beyond the simulated horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("evaluation times must be sorted and non-negative")]
    UnsortedTimes,

    #[error("finite-difference stencil leaves the validity domain: {0}")]
    DomainMargin(String),

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, KacError>;

impl From<std::io::Error> for KacError {
    fn from(e: std::io::Error) -> Self {
        KacError::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> KacError {
    KacError::InvalidParameter { name, reason: reason.into() }
}
