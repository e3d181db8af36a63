//! Teacher training: denoising score matching against an analytic mixture.
//!
//! Noise levels are drawn log-uniformly over [sigma_min, sigma(t_max)] and
//! each sample's squared error is weighted by 1/c_out(sigma)^2, which
//! equalizes the effective regression target scale across noise levels (the
//! optimal weighted per-sample loss equals the data dimension for Gaussian
//! data).

use rand::Rng;
use rand_distr::StandardNormal;
use tdm_autodiff::{AdamW, AdamWConfig, Tape, Tensor};

use crate::error::{DiffusionError, Result};
use crate::gmm::GaussianMixture;
use crate::net::{DenoiserNet, NetConfig, Role, SigmaQuery};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, Copy)]
pub struct TeacherOptions {
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    /// Lower bound of the log-uniform noise-level distribution.
    pub sigma_min: f64,
    /// Record the loss every this many iterations (and always the last).
    pub log_every: usize,
}

impl Default for TeacherOptions {
    fn default() -> Self {
        Self {
            iters: 20_000,
            batch: 256,
            lr: 1e-3,
            sigma_min: 1e-2,
            log_every: 100,
        }
    }
}

pub struct TeacherRun {
    pub net: DenoiserNet,
    /// (iteration, loss) pairs at the logging cadence.
    pub losses: Vec<(usize, f64)>,
}

/// One denoising score-matching loss evaluation for a given batch of clean
/// samples, noise, and noise levels. Exposed for oracle tests.
pub fn teacher_loss(
    net: &DenoiserNet,
    x0: &[f64],
    noise: &[f64],
    sigmas: &[f64],
) -> Result<f64> {
    let d = net.config().data_dim;
    let batch = sigmas.len();
    if x0.len() != batch * d || noise.len() != batch * d {
        return Err(DiffusionError::NoiseLength {
            expected: batch * d,
            got: x0.len(),
        });
    }
    let x_sigma: Vec<f64> = x0
        .iter()
        .zip(noise)
        .enumerate()
        .map(|(i, (&x, &e))| x + sigmas[i / d] * e)
        .collect();
    let x_t = Tensor::matrix(batch, d, x_sigma)?;
    let f = net.forward(&x_t, SigmaQuery::PerSample(sigmas), None)?;
    let target = Tensor::matrix(batch, d, x0.to_vec())?;
    let r = f.sub(&target)?;
    let sq = r.mul(&r)?.row_sum()?;
    let s = net.config().data_std;
    let w: Vec<f64> = sigmas
        .iter()
        .map(|&sg| (sg * sg + s * s) / (sg * sg * s * s))
        .collect();
    let weighted = sq.mul(&Tensor::vector(w)?)?;
    Ok(weighted.mean_all()?.item()?)
}

/// Train a teacher denoiser on the analytic mixture. Fails fast on a
/// non-finite loss (divergence) with the offending iteration.
pub fn train_teacher<R: Rng + ?Sized>(
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    cfg: NetConfig,
    opts: TeacherOptions,
    rng: &mut R,
) -> Result<TeacherRun> {
    if cfg.k_cond {
        return Err(DiffusionError::KConditioningMismatch {
            net_k_cond: true,
            k_given: false,
        });
    }
    if opts.batch == 0 {
        return Err(DiffusionError::EmptyBatch);
    }
    let mut net = DenoiserNet::init(cfg, Role::Teacher, rng)?;
    let mut opt = AdamW::new(AdamWConfig::with_lr(opts.lr))?;
    let d = cfg.data_dim;
    let s = cfg.data_std;
    let (ln_lo, ln_hi) = (opts.sigma_min.ln(), sched.max_sigma().ln());

    let mut losses = Vec::new();
    for iter in 0..opts.iters {
        // Cosine decay to zero: with beta1 = 0 the optimizer keeps bouncing
        // around the optimum at a fixed learning rate, and the final score
        // accuracy is limited by that noise floor rather than capacity.
        let progress = iter as f64 / opts.iters as f64;
        opt.set_lr(opts.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))?;
        let x0 = gmm.sample(opts.batch, rng);
        let mut sigmas = vec![0.0; opts.batch];
        for sg in sigmas.iter_mut() {
            let u: f64 = rng.random();
            *sg = (ln_lo + u * (ln_hi - ln_lo)).exp();
        }
        let mut x_sigma = vec![0.0; opts.batch * d];
        for (i, v) in x_sigma.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = x0[i] + sigmas[i / d] * z;
        }

        // Tensor ops reject non-finite values at the producing op; surface
        // that as a divergence diagnostic with the iteration number.
        let step = (|| -> Result<(f64, Vec<Vec<f64>>)> {
            let tape = Tape::new();
            let bound = net.bind(&tape)?;
            let x_t = Tensor::matrix(opts.batch, d, x_sigma)?;
            let f = bound.forward(&x_t, SigmaQuery::PerSample(&sigmas), None)?;
            let target = Tensor::matrix(opts.batch, d, x0)?;
            let r = f.sub(&target)?;
            let sq = r.mul(&r)?.row_sum()?;
            let w: Vec<f64> = sigmas
                .iter()
                .map(|&sg| (sg * sg + s * s) / (sg * sg * s * s))
                .collect();
            let loss_t = sq.mul(&Tensor::vector(w)?)?.mean_all()?;
            let loss = loss_t.item()?;
            let grads = bound.grads(&loss_t.backward()?);
            Ok((loss, grads))
        })();
        let (loss, grads) = match step {
            Ok(ok) => ok,
            Err(DiffusionError::Autodiff(tdm_autodiff::AutodiffError::NonFinite { .. })) => {
                return Err(DiffusionError::TeacherDiverged {
                    iteration: iter,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        opt.step(net.params_mut(), &grads)?;

        if iter % opts.log_every == 0 || iter + 1 == opts.iters {
            losses.push((iter, loss));
        }
    }
    Ok(TeacherRun { net, losses })
}
