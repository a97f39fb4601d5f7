use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdsError {
    #[error("{what} = {value} is not a multiple of dt = {dt}")]
    NotGridAligned { what: &'static str, value: f64, dt: f64 },

    #[error("time {t} lies outside the noise window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error("invalid window [{lo}, {hi}]: must satisfy lo <= 0 <= hi")]
    InvalidWindow { lo: f64, hi: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("system {0} has no Jacobian stepper")]
    MissingJacobian(&'static str),

    #[error("no stationary sampler available for system {0}")]
    SamplerUnavailable(&'static str),

    #[error("i/o error: {0}")]
    Io(String),
}

impl RdsError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        RdsError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for RdsError {
    fn from(e: std::io::Error) -> Self {
        RdsError::Io(e.to_string())
    }
}

pub type Result<T, E = RdsError> = std::result::Result<T, E>;
