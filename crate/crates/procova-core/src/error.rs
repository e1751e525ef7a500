use thiserror::Error;

/// Errors shared by the numeric substrate and the estimators built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty dataset: {0}")]
    EmptyData(String),
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("all subjects in the same arm; treatment contrast not identifiable")]
    SingleArm,
    #[error("prognostic score has zero variance over the support")]
    DegenerateScore,
    #[error("invalid contrast target: {0}")]
    InvalidTarget(String),
    #[error("probability must lie strictly in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("all {0} replications failed")]
    AllReplicationsFailed(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
