use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument {x} outside the supported range |x| <= {limit}")]
    OutOfRange { x: f64, limit: f64 },

    #[error("unsupported quadrature degree {0} (expected 6..=50)")]
    QuadratureDegree(usize),

    #[error("non-finite derivative at t = {t:e} s: {state}")]
    NonFinite { t: f64, state: String },

    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("energy blow-up at t = {t:e} s: E = {energy:e} J exceeds {limit:e} J")]
    EnergyBlowUp { t: f64, energy: f64, limit: f64 },

    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::StepUnderflow { .. } | Error::EnergyBlowUp { .. }
        )
    }
}
