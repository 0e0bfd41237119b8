use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("metric is not positive-definite (Cholesky failed) at point {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point {point:?} lies outside chart `{chart}`")]
    OutsideDomain { chart: String, point: Vec<f64> },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("missing field: {0}")]
    MissingField(String),

    #[error("time window violated: {0}")]
    Window(String),

    #[error("flow state invariant violated at t = {t}: {reason}\n{dump}")]
    InvariantBreach { t: f64, reason: String, dump: String },

    #[error("unknown catalog entry `{name}`; available: {available}")]
    UnknownName { name: String, available: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
