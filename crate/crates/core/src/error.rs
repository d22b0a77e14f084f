use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("t = {t} outside tabulated range [0, {t_max}]")]
    OutOfDomain { t: f64, t_max: f64 },

    #[error("profile `{name}` must be positive but evaluates to {value} at t = {t}")]
    NotPositive { name: &'static str, t: f64, value: f64 },

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("singular tridiagonal system at row {row}")]
    Singular { row: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid certificate: mu(t) = {value} <= 0 at t = {t}")]
    InvalidCertificate { t: f64, value: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("convergence order inconclusive: errors {errors:?} do not decrease monotonically")]
    InconclusiveOrder { errors: Vec<f64> },

    #[error("theorem not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure_finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(name))
    }
}
