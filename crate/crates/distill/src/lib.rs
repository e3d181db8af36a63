//! Trajectory distribution matching: distills a diffusion teacher into a
//! few-step student sampler by aligning the distribution of every
//! intermediate sampler state with the teacher's diffused data distribution.
//!
//! The training loop ([`Distiller`]) alternates two updates.  A fake score
//! model chases the student's own state distribution through a weighted
//! denoising regression ([`fake_score_loss`]), and the student pulls each
//! trajectory boundary state towards a revised target shifted by the
//! real-minus-fake score difference ([`revised_target`]), differentiating
//! only through the solver step that produced the state.
//!
//! [`InstanceTrajDistiller`] provides the instance-level regression baseline
//! and [`shared_fake_optimum`] the closed-form stationary point of a fake
//! score model shared between two sampler branches.

mod baselines;
mod config;
mod engine;
mod error;
mod importance;
mod losses;
mod shared_fake;

pub use baselines::{InstanceTrajConfig, InstanceTrajDistiller, InstanceTrajStep};
pub use config::{default_huber_c, DistillConfig, GeneratorLoss, LambdaRule};
pub use engine::{Distiller, StepMetrics};
pub use error::{DistillError, Result};
pub use importance::{diffuse_from_trajectory, importance_weight, sample_tau, DiffusedBatch};
pub use losses::{fake_score_loss, huber_loss, l2_loss, revised_target};
pub use shared_fake::{shared_fake_optimum, train_shared_fake, SharedFakeOptions, SharedFakeRun};
