use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdm_autodiff::{AdamW, AdamWConfig, AutodiffError, Tape, Tensor};
use tdm_diffusion::{
    partition_times, sample_trajectory, BoundDenoiserNet, DenoiserNet, NoiseSchedule, Role,
    SigmaQuery,
};

use crate::config::{DistillConfig, GeneratorLoss};
use crate::error::{DistillError, Result};
use crate::importance::{diffuse_from_trajectory, sample_tau, DiffusedBatch};
use crate::losses::{fake_score_loss, huber_loss, l2_loss, revised_target};

/// Per-iteration diagnostics of the distillation loop.
#[derive(Debug, Clone)]
pub struct StepMetrics {
    pub iteration: u64,
    /// Step count drawn this iteration.
    pub k: u32,
    /// Interval index whose boundary state received the update.
    pub m: usize,
    /// Intermediate time of the last fake sub-update (reused by the
    /// generator update).
    pub tau: f64,
    /// NaN when the corresponding update was skipped as non-finite.
    pub loss_fake: f64,
    pub loss_gen: f64,
    pub weight_mean: f64,
    pub weight_max: f64,
    /// Pre-clip gradient norms reported by the optimizer.
    pub grad_norm_fake: f64,
    pub grad_norm_gen: f64,
    pub applied_fake: bool,
    pub applied_gen: bool,
}

/// Alternating fake-score / generator training over sampler trajectories.
///
/// Each iteration: draw a step count K, roll the student sampler from noise
/// down to the data, pick one partition interval, diffuse its boundary state
/// to an intermediate time, refresh the fake score model on that batch, and
/// pull the boundary state towards the target revised by the real-minus-fake
/// score difference.  Gradients reach the student only through the solver
/// step that produced the chosen boundary state.
pub struct Distiller {
    teacher: DenoiserNet,
    student: DenoiserNet,
    fake: DenoiserNet,
    sched: NoiseSchedule,
    cfg: DistillConfig,
    opt_gen: AdamW,
    opt_fake: AdamW,
    rng: ChaCha8Rng,
    iteration: u64,
}

impl Distiller {
    /// Starts from a trained teacher: both the student and the fake score
    /// model are initialised as copies of it.
    pub fn new(
        teacher: DenoiserNet,
        sched: NoiseSchedule,
        cfg: DistillConfig,
        seed: u64,
    ) -> Result<Self> {
        let k_cond = cfg.needs_k_conditioning();
        let student = teacher.clone_as(Role::Student, k_cond);
        let fake = teacher.clone_as(Role::Fake, k_cond);
        Self::from_parts(teacher, student, fake, sched, cfg, seed)
    }

    /// Resumes with explicit student and fake nets (e.g. from checkpoints).
    pub fn from_parts(
        teacher: DenoiserNet,
        student: DenoiserNet,
        fake: DenoiserNet,
        sched: NoiseSchedule,
        cfg: DistillConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if teacher.config().k_cond {
            return Err(DistillError::InvalidConfig {
                reason: "the teacher must not be step-count conditioned".into(),
            });
        }
        let k_cond = cfg.needs_k_conditioning();
        for (name, net) in [("student", &student), ("fake", &fake)] {
            if net.config().k_cond != k_cond {
                return Err(DistillError::InvalidConfig {
                    reason: format!(
                        "{name} net k_cond = {} but k_list has {} entries",
                        net.config().k_cond,
                        cfg.k_list.len()
                    ),
                });
            }
            if net.config().data_dim != teacher.config().data_dim {
                return Err(DistillError::InvalidConfig {
                    reason: format!("{name} net dimension differs from the teacher's"),
                });
            }
        }
        if !sched.covers_data_std(teacher.config().data_std) {
            return Err(DistillError::InvalidConfig {
                reason: "schedule max sigma does not dominate the data scale".into(),
            });
        }
        let opt_gen = AdamW::new(AdamWConfig::with_lr(cfg.lr_generator))?;
        let opt_fake = AdamW::new(AdamWConfig::with_lr(cfg.lr_fake))?;
        Ok(Distiller {
            teacher,
            student,
            fake,
            sched,
            cfg,
            opt_gen,
            opt_fake,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
        })
    }

    pub fn teacher(&self) -> &DenoiserNet {
        &self.teacher
    }

    pub fn student(&self) -> &DenoiserNet {
        &self.student
    }

    pub fn fake(&self) -> &DenoiserNet {
        &self.fake
    }

    pub fn config(&self) -> &DistillConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.sched
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Scales both learning rates to `factor` times their configured values.
    /// Callers that know their training horizon use this to anneal the step
    /// size; with beta1 = 0 a constant rate leaves the parameters bouncing
    /// around the optimum at a noise floor set by the rate itself.
    pub fn set_lr_factor(&mut self, factor: f64) -> Result<()> {
        self.opt_gen.set_lr(self.cfg.lr_generator * factor)?;
        self.opt_fake.set_lr(self.cfg.lr_fake * factor)?;
        Ok(())
    }

    /// One distillation iteration: fake-score update(s) followed by a
    /// generator update on a fresh student trajectory.  Non-finite losses
    /// skip their update and are reported as NaN in the metrics; errors from
    /// an already-broken student (non-finite parameters) propagate.
    pub fn step(&mut self) -> Result<StepMetrics> {
        let dim = self.teacher.config().data_dim;
        let k = if self.cfg.k_list.len() == 1 {
            self.cfg.k_list[0]
        } else {
            let i = self.rng.random_range(0..self.cfg.k_list.len());
            self.cfg.k_list[i]
        };
        let k_arg = self.cfg.needs_k_conditioning().then_some(k);
        let m = self.rng.random_range(0..k as usize);

        let traj = sample_trajectory(
            &self.student,
            k_arg,
            &self.sched,
            k,
            self.cfg.batch,
            self.cfg.solver,
            Some(m),
            &mut self.rng,
        )?;
        let binding = traj.grad.as_ref().expect("grad step was requested");
        let times = partition_times(&self.sched, k)?;
        let (t_lo, t_hi) = (times[m], times[m + 1]);

        let clean_vals = traj.clean_at(m).expect("boundary in range").shared_data();
        let tracked = if self.cfg.clean_matching { &binding.clean } else { &binding.state };
        let base_vals = tracked.shared_data();
        // Clean matching treats the clean prediction as a noise-free state:
        // the proposal then coincides with the target and every weight is 1.
        let sigma_state = if self.cfg.clean_matching { 0.0 } else { self.sched.sigma(t_lo)? };

        // Fake-score phase: each sub-update re-diffuses the same boundary
        // batch at a fresh intermediate time.
        let mut fake_outcome = None;
        let mut last: Option<(f64, DiffusedBatch)> = None;
        for _ in 0..self.cfg.fake_updates_per_iter {
            let tau = sample_tau(t_lo, t_hi, &mut self.rng)?;
            let sigma_tau = self.sched.sigma(tau)?;
            let diffused = diffuse_from_trajectory(
                &base_vals,
                &clean_vals,
                dim,
                sigma_state,
                sigma_tau,
                self.cfg.importance_sampling,
                self.cfg.importance_clip,
                &mut self.rng,
            )?;
            fake_outcome = self.fake_update(&diffused, &clean_vals, k_arg)?;
            last = Some((tau, diffused));
        }
        let (tau, diffused) = last.expect("at least one fake update");
        let sigma_tau = self.sched.sigma(tau)?;

        // Generator phase on the same diffused batch, against the fake net
        // as just refreshed.
        let gen_outcome =
            self.generator_update(&binding.net, tracked, &base_vals, &diffused, sigma_tau, k_arg)?;

        self.iteration += 1;
        let (loss_fake, grad_norm_fake, applied_fake) =
            fake_outcome.unwrap_or((f64::NAN, f64::NAN, false));
        let (loss_gen, grad_norm_gen, applied_gen) =
            gen_outcome.unwrap_or((f64::NAN, f64::NAN, false));
        Ok(StepMetrics {
            iteration: self.iteration,
            k,
            m,
            tau,
            loss_fake,
            loss_gen,
            weight_mean: diffused.weight_mean(),
            weight_max: diffused.weight_max(),
            grad_norm_fake,
            grad_norm_gen,
            applied_fake,
            applied_gen,
        })
    }

    /// Weighted clean-prediction regression plus one optimizer step on the
    /// fake net.  `None` means the loss came out non-finite and the update
    /// was skipped.
    fn fake_update(
        &mut self,
        diffused: &DiffusedBatch,
        clean_vals: &[f64],
        k_arg: Option<u32>,
    ) -> Result<Option<(f64, f64, bool)>> {
        let tape = Tape::new();
        let bound = self.fake.bind(&tape)?;
        let loss = match fake_score_loss(
            &bound,
            &diffused.x_tau,
            clean_vals,
            &diffused.weights,
            diffused.sigma_tau,
            k_arg,
        ) {
            Ok(t) => t,
            Err(e) if is_non_finite(&e) => {
                log::warn!(
                    "fake-score loss non-finite at iteration {}; update skipped",
                    self.iteration
                );
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let value = loss.item()?;
        let grads = bound.grads(&loss.backward()?);
        let outcome = self.opt_fake.step(self.fake.params_mut(), &grads)?;
        Ok(Some((value, outcome.grad_norm, outcome.applied)))
    }

    /// Builds the revised target from the frozen real and fake denoisers and
    /// pulls the tracked boundary state towards it.
    fn generator_update(
        &mut self,
        bound: &BoundDenoiserNet,
        tracked: &Tensor,
        base_vals: &[f64],
        diffused: &DiffusedBatch,
        sigma_tau: f64,
        k_arg: Option<u32>,
    ) -> Result<Option<(f64, f64, bool)>> {
        let dim = self.teacher.config().data_dim;
        let batch = base_vals.len() / dim;
        let loss = match (|| -> Result<Tensor> {
            let x_tau = Tensor::matrix(batch, dim, diffused.x_tau.clone())?;
            let f_real = self.teacher.forward(&x_tau, SigmaQuery::Shared(sigma_tau), None)?;
            let f_fake = self.fake.forward(&x_tau, SigmaQuery::Shared(sigma_tau), k_arg)?;
            let target = revised_target(
                base_vals,
                f_real.data(),
                f_fake.data(),
                dim,
                self.cfg.lambda_rule,
            )?;
            let target = Tensor::matrix(batch, dim, target)?;
            match self.cfg.loss {
                GeneratorLoss::L2 => l2_loss(tracked, &target),
                GeneratorLoss::Huber => huber_loss(tracked, &target, self.cfg.huber_c(dim)),
            }
        })() {
            Ok(t) => t,
            Err(e) if is_non_finite(&e) => {
                log::warn!(
                    "generator loss non-finite at iteration {}; update skipped",
                    self.iteration
                );
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let value = loss.item()?;
        let grads = bound.grads(&loss.backward()?);
        let outcome = self.opt_gen.step(self.student.params_mut(), &grads)?;
        Ok(Some((value, outcome.grad_norm, outcome.applied)))
    }
}

fn is_non_finite(e: &DistillError) -> bool {
    matches!(
        e,
        DistillError::Autodiff(AutodiffError::NonFinite { .. })
            | DistillError::Diffusion(tdm_diffusion::DiffusionError::Autodiff(
                AutodiffError::NonFinite { .. }
            ))
    )
}
