use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("delay {delay:.6e} s of component {id} exceeds the unambiguous range {max:.6e} s")]
    DelayOutOfRange { id: i64, delay: f64, max: f64 },
    #[error("ill-conditioned Gram matrix (condition {cond:.3e}); closest pair of components {i} and {j}")]
    IllConditioned { cond: f64, i: usize, j: usize },
    #[error("covariance not positive definite for {0}")]
    NotPositiveDefinite(String),
    #[error("measurement has zero energy")]
    ZeroMeasurement,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
