use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid sequence space: {0}")]
    InvalidSpace(String),

    #[error("invalid ordering: {0}")]
    InvalidOrder(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("enumeration of {what} exceeds the cap of {cap}")]
    CapExceeded { what: String, cap: u128 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid estimator input: {0}")]
    InvalidEstimate(String),

    #[error("surrogate must be strictly positive, got log ψ = {0}")]
    NonPositiveSurrogate(f64),

    #[error("self-surrogate bank overlaps the estimation bank")]
    CorrelatedSurrogate,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
