use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {found} record(s); at least {needed} required")]
    TooFewRecords { needed: usize, found: usize },
    #[error("dataset has {found} observed event(s); at least {needed} required")]
    InsufficientEvents { needed: usize, found: usize },
    #[error("both treatment arms must be present")]
    SingleArm,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("moment covariance not positive definite at maximum ridge level")]
    SingularCovariance,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("log target non-finite after {0} initialization attempts")]
    NonFiniteTarget(usize),
    #[error("diagnostics need at least {needed} draws per chain, found {found}")]
    TooFewDraws { needed: usize, found: usize },
    #[error("diagnostics need at least 2 chains, found {0}")]
    TooFewChains(usize),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("censoring target unachievable: {0}")]
    Unachievable(String),
    #[error("{found} converged replication(s); at least {needed} required")]
    TooFewConverged { needed: usize, found: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
