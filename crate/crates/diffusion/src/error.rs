use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error(transparent)]
    Autodiff(#[from] tdm_autodiff::AutodiffError),

    #[error("time {t} outside schedule range [0, {t_max}]")]
    TimeOutOfRange { t: f64, t_max: f64 },

    #[error("step must go backward in time with s >= 0: got t = {t}, s = {s}")]
    InvalidStepOrder { t: f64, s: f64 },

    #[error("denoiser evaluation requires sigma > 0, got {sigma}")]
    NonPositiveSigma { sigma: f64 },

    #[error("covariance of component {component} is not symmetric positive definite")]
    DegenerateCovariance { component: usize },

    #[error("invalid mixture: {reason}")]
    InvalidMixture { reason: String },

    #[error("noise length {got} does not match data length {expected}")]
    NoiseLength { expected: usize, got: usize },

    #[error("trajectory step count K must be >= 1, got {k}")]
    InvalidK { k: u32 },

    #[error("grad step index {index} out of range for K = {k}")]
    GradStepOutOfRange { index: usize, k: u32 },

    #[error("network K-conditioning mismatch: net k_cond = {net_k_cond}, k argument given = {k_given}")]
    KConditioningMismatch { net_k_cond: bool, k_given: bool },

    #[error("teacher training diverged at iteration {iteration} (loss = {loss})")]
    TeacherDiverged { iteration: usize, loss: f64 },

    #[error("batch size must be >= 1")]
    EmptyBatch,
}

pub type Result<T, E = DiffusionError> = std::result::Result<T, E>;
