//! Variance-exploding diffusion on analytic Gaussian mixtures.
//!
//! Everything downstream of this crate (distillation, metrics, experiments)
//! leans on one property: for Gaussian-mixture data the diffused marginals,
//! scores, and posterior-mean denoisers are available in closed form at every
//! noise level, so trained networks can be compared against exact references
//! instead of Monte Carlo stand-ins.

pub mod checkpoint;
mod error;
mod gmm;
mod net;
mod sampler;
mod schedule;
mod teacher;

pub use error::{DiffusionError, Result};
// Re-exported so callers of the net interfaces (which trade in tracked
// tensors) don't need a separate dependency on the autodiff crate.
pub use tdm_autodiff::{Gradients, Tape, Tensor};
pub use gmm::{analytic_denoiser, analytic_score, DiffusedMixture, GaussianMixture};
pub use net::{
    score_from_denoiser, BoundDenoiserNet, DenoiserNet, Linear, NetConfig, Role, SigmaQuery,
    K_EMB_DIM, TIME_EMB_DIM,
};
pub use sampler::{
    euler_step, exact_gauss_map, heun_step, partition_times, record_trajectory, sample_final,
    sample_trajectory, solver_step, BoundNetDenoiser, Denoiser, GradBinding, MixtureDenoiser,
    NetDenoiser, Solver, Trajectory,
};
pub use schedule::{diffuse, NoiseSchedule};
pub use teacher::{teacher_loss, train_teacher, TeacherOptions, TeacherRun};
