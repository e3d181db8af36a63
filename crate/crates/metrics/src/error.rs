use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Diffusion(#[from] tdm_diffusion::DiffusionError),
    #[error("empty sample set")]
    EmptySamples,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample buffer of length {len} is not a whole number of rows of dim {dim}")]
    RaggedSamples { len: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },
    #[error("partition does not match the recorded trajectory: {reason}")]
    PartitionMismatch { reason: String },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },
}

pub type Result<T> = std::result::Result<T, MetricsError>;
