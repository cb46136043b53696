use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: order {order} vs {check_order} differ by {discrepancy:.3e} (relative)")]
    QuadratureNonConvergence {
        order: usize,
        check_order: usize,
        discrepancy: f64,
    },

    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),

    #[error("symplectic eigenvalue {value} below 1 (invalid covariance matrix)")]
    InvalidCovariance { value: f64 },

    #[error("no positive-key regime: {0}")]
    NoPositiveKey(String),

    #[error("no feasible distance in [{from_km}, {to_km}] km")]
    NoFeasibleDistance { from_km: f64, to_km: f64 },

    #[error("rating: {0}")]
    Rating(String),

    #[error("config: {path}: {message}")]
    Config { path: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
