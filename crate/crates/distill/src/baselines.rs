use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tdm_autodiff::{AdamW, AdamWConfig, Tape, Tensor};
use tdm_diffusion::{
    partition_times, sample_final, solver_step, BoundNetDenoiser, DenoiserNet, NetDenoiser,
    NoiseSchedule, Role, Solver,
};

use crate::error::{DistillError, Result};
use crate::losses::l2_loss;

/// Hyper-parameters of the instance-level trajectory regression baseline.
#[derive(Debug, Clone)]
pub struct InstanceTrajConfig {
    pub k: u32,
    pub batch: usize,
    pub lr: f64,
    /// Fine teacher solver sub-steps per interval when building the
    /// regression target.
    pub teacher_substeps: u32,
    /// Teacher samples kept as the clean pool.
    pub pool_size: usize,
    /// Teacher solver steps used to generate the pool.
    pub pool_steps: u32,
    /// Solver of the student's single step per interval.
    pub solver: Solver,
}

impl InstanceTrajConfig {
    pub fn for_k(k: u32) -> Self {
        InstanceTrajConfig {
            k,
            batch: 256,
            lr: 1e-4,
            teacher_substeps: 8,
            pool_size: 4096,
            pool_steps: 64,
            solver: Solver::Euler,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(DistillError::InvalidConfig { reason });
        if self.k == 0 {
            return fail("k must be positive".into());
        }
        if self.batch == 0 || self.pool_size == 0 {
            return fail("batch and pool_size must be positive".into());
        }
        if self.teacher_substeps == 0 || self.pool_steps == 0 {
            return fail("teacher_substeps and pool_steps must be positive".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail(format!("lr must be positive and finite, got {}", self.lr));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct InstanceTrajStep {
    pub iteration: u64,
    /// Interval index trained this iteration.
    pub m: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub applied: bool,
}

/// Instance-level baseline: regress the student's single solver step per
/// interval onto a many-step teacher solve of the same interval, pairing
/// states sample by sample instead of matching distributions.  Every
/// iteration pays for `teacher_substeps` fine solver steps, which is the cost
/// the distribution-level loop avoids.
pub struct InstanceTrajDistiller {
    teacher: DenoiserNet,
    student: DenoiserNet,
    sched: NoiseSchedule,
    cfg: InstanceTrajConfig,
    opt: AdamW,
    rng: ChaCha8Rng,
    pool: Vec<f64>,
    iteration: u64,
}

impl InstanceTrajDistiller {
    pub fn new(
        teacher: DenoiserNet,
        sched: NoiseSchedule,
        cfg: InstanceTrajConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if teacher.config().k_cond {
            return Err(DistillError::InvalidConfig {
                reason: "the teacher must not be step-count conditioned".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool = sample_final(
            &NetDenoiser { net: &teacher, k: None },
            &sched,
            cfg.pool_steps,
            cfg.pool_size,
            Solver::Heun,
            &mut rng,
        )?;
        let student = teacher.clone_as(Role::Student, false);
        let opt = AdamW::new(AdamWConfig::with_lr(cfg.lr))?;
        Ok(InstanceTrajDistiller { teacher, student, sched, cfg, opt, rng, pool, iteration: 0 })
    }

    pub fn student(&self) -> &DenoiserNet {
        &self.student
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Scales the learning rate to `factor` times its configured value, for
    /// callers that anneal the step size over a known training horizon.
    pub fn set_lr_factor(&mut self, factor: f64) -> Result<()> {
        self.opt.set_lr(self.cfg.lr * factor)?;
        Ok(())
    }

    /// One regression iteration on a random interval of the partition.
    pub fn step(&mut self) -> Result<InstanceTrajStep> {
        let dim = self.teacher.config().data_dim;
        let times = partition_times(&self.sched, self.cfg.k)?;
        let m = self.rng.random_range(0..self.cfg.k as usize);
        let (t_lo, t_hi) = (times[m], times[m + 1]);
        let sigma_hi = self.sched.sigma(t_hi)?;

        // Diffuse a random draw from the clean pool to the interval top.
        let n_rows = self.pool.len() / dim;
        let mut x_t = vec![0.0; self.cfg.batch * dim];
        for b in 0..self.cfg.batch {
            let src = self.rng.random_range(0..n_rows) * dim;
            for j in 0..dim {
                let z: f64 = self.rng.sample(StandardNormal);
                x_t[b * dim + j] = self.pool[src + j] + sigma_hi * z;
            }
        }
        let x_t = Tensor::matrix(self.cfg.batch, dim, x_t)?;

        // Fine teacher solve of the interval: the per-sample target.
        let teacher_d = NetDenoiser { net: &self.teacher, k: None };
        let n_sub = self.cfg.teacher_substeps as usize;
        let mut y = x_t.clone();
        for j in 0..n_sub {
            let a = t_hi + (t_lo - t_hi) * j as f64 / n_sub as f64;
            let b = t_hi + (t_lo - t_hi) * (j + 1) as f64 / n_sub as f64;
            let b = if j + 1 == n_sub { t_lo } else { b };
            let (next, _) = solver_step(Solver::Heun, &teacher_d, &self.sched, &y, a, b)?;
            y = next;
        }
        let target = Tensor::matrix(self.cfg.batch, dim, y.data().to_vec())?;

        // Single tracked student step over the same interval.
        let tape = Tape::new();
        let bound = self.student.bind(&tape)?;
        let student_d = BoundNetDenoiser { net: &bound, k: None };
        let (state, _) = solver_step(self.cfg.solver, &student_d, &self.sched, &x_t, t_hi, t_lo)?;

        let loss = l2_loss(&state, &target)?;
        let value = loss.item()?;
        let grads = bound.grads(&loss.backward()?);
        let outcome = self.opt.step(self.student.params_mut(), &grads)?;

        self.iteration += 1;
        Ok(InstanceTrajStep {
            iteration: self.iteration,
            m,
            loss: value,
            grad_norm: outcome.grad_norm,
            applied: outcome.applied,
        })
    }
}
