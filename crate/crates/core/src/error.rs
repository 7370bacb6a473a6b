use thiserror::Error;

/// Errors raised by the numerical kernels and decision procedures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("index ({0}, {1}) lies outside the admissible triangle")]
    OutsideTriangle(f64, f64),
    #[error("perturbation target invalid: alpha_1 + gamma0_1 = {0} > 1")]
    InvalidTarget(f64),
    #[error("potential class inadmissible: kappa0 = {0} >= 1")]
    Inadmissible(f64),
    #[error("no admissible alpha for gamma = ({0}, {1})")]
    NoAdmissibleAlpha(f64, f64),
    #[error("under-resolved: {0}")]
    UnderResolved(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("existence condition violated: {0}")]
    NoTangent(String),
    #[error("contraction not achieved: {0}")]
    NonContraction(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("non-finite values encountered at t = {0}")]
    BlowUp(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
