//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel `{0}` has no pointwise form")]
    NonEvaluable(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("kernel `{0}` is not locally integrable")]
    NotIntegrable(String),
    #[error("no closed form: {0}")]
    NoClosedForm(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("abscissa violation: {0}")]
    AbscissaViolation(String),
    #[error("degenerate request: {0}")]
    DegenerateRequest(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("precision loss: {0}")]
    PrecisionLoss(String),
    #[error("series did not converge: {0}")]
    NonConvergent(String),
    #[error("spectrum outside the certified regime: {0}")]
    UncertifiedSpectrum(String),
    #[error("unknown pair `{0}`")]
    UnknownPair(String),
    #[error("validity predicate failed: {0}")]
    ValidityViolation(String),
    #[error("interval exceeded: {0}")]
    IntervalExceeded(String),
    #[error("divergent moment: {0}")]
    DivergentMoment(String),
    #[error("no shipped kernel pair: {0}")]
    NoShippedPair(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
