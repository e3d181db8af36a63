use thiserror::Error;

/// Errors produced while configuring or running a distillation loop.
#[derive(Debug, Error)]
pub enum DistillError {
    #[error(transparent)]
    Autodiff(#[from] tdm_autodiff::AutodiffError),

    #[error(transparent)]
    Diffusion(#[from] tdm_diffusion::DiffusionError),

    /// The intermediate time must add noise on top of the trajectory state.
    #[error("noise level must increase: sigma at the state is {sigma_state}, sigma at tau is {sigma_tau}")]
    NonIncreasingNoise { sigma_state: f64, sigma_tau: f64 },

    #[error("invalid distillation config: {reason}")]
    InvalidConfig { reason: String },

    #[error("interval index {index} out of range for a {k}-step sampler")]
    IntervalOutOfRange { index: usize, k: u32 },

    #[error("batch data has length {got}, expected {expected}")]
    DataShape { expected: usize, got: usize },

    /// Both branch densities underflowed to zero at the query point, so the
    /// blended score is undefined there.
    #[error("both branch densities vanished at the query point")]
    DegenerateDensity,
}

pub type Result<T, E = DistillError> = std::result::Result<T, E>;
