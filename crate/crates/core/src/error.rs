use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("exterior tail is not integrable: exponent {exponent} must be below {limit}")]
    NonIntegrableTail { exponent: f64, limit: f64 },

    #[error("grid does not cover the requested region: {0}")]
    Coverage(String),

    #[error("linear system is singular or not positive definite: {0}")]
    Singular(String),

    #[error("quadrature failed to reach tolerance {tolerance:e} (estimate {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("iteration cap of {cap} reached in {context}")]
    IterationCap { cap: usize, context: String },

    #[error("not enough usable samples: {0}")]
    InsufficientSamples(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
