//! Probability-flow ODE samplers over the uniform time partition
//! t_i = t_max·i/K, plus trajectory recording with an optional gradient-
//! carrying step for distillation.
//!
//! For sigma(t) = t the ODE is dx/dt = (x − f(x, t))/t; Euler and Heun
//! discretizations follow. The final step to t = 0 returns the clean
//! prediction exactly (algebraically equal, and bit-exact here).

use rand::Rng;
use rand_distr::StandardNormal;
use tdm_autodiff::{Tape, Tensor};

use crate::error::{DiffusionError, Result};
use crate::gmm::GaussianMixture;
use crate::net::{BoundDenoiserNet, DenoiserNet, SigmaQuery};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Euler,
    Heun,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Euler => "euler",
            Solver::Heun => "heun",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euler" => Some(Solver::Euler),
            "heun" => Some(Solver::Heun),
            _ => None,
        }
    }
}

/// Anything that maps a noisy batch at a given noise level to clean
/// predictions: trained networks (frozen or tape-bound) and the analytic
/// posterior mean.
pub trait Denoiser {
    fn dim(&self) -> usize;
    fn denoise(&self, x: &Tensor, sigma: f64) -> Result<Tensor>;
}

/// A frozen network with its K-conditioning argument fixed.
pub struct NetDenoiser<'a> {
    pub net: &'a DenoiserNet,
    pub k: Option<u32>,
}

impl Denoiser for NetDenoiser<'_> {
    fn dim(&self) -> usize {
        self.net.config().data_dim
    }

    fn denoise(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        self.net.forward(x, SigmaQuery::Shared(sigma), self.k)
    }
}

/// A tape-bound network with fixed K-conditioning: forwards record gradients.
pub struct BoundNetDenoiser<'a> {
    pub net: &'a BoundDenoiserNet,
    pub k: Option<u32>,
}

impl Denoiser for BoundNetDenoiser<'_> {
    fn dim(&self) -> usize {
        self.net.config().data_dim
    }

    fn denoise(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        self.net.forward(x, SigmaQuery::Shared(sigma), self.k)
    }
}

/// The exactly-scored teacher: closed-form posterior mean of a mixture.
pub struct MixtureDenoiser<'a> {
    pub gmm: &'a GaussianMixture,
}

impl Denoiser for MixtureDenoiser<'_> {
    fn dim(&self) -> usize {
        self.gmm.dim()
    }

    fn denoise(&self, x: &Tensor, sigma: f64) -> Result<Tensor> {
        let vals = self.gmm.diffused(sigma)?.denoise_batch(x.data());
        Ok(Tensor::from_shared(x.shape().to_vec(), vals.into())?)
    }
}

fn check_step(sched: &NoiseSchedule, t: f64, s: f64) -> Result<()> {
    sched.check(t)?;
    sched.check(s)?;
    if !(s < t) || t <= 0.0 {
        return Err(DiffusionError::InvalidStepOrder { t, s });
    }
    Ok(())
}

/// One Euler step t → s. Returns (x_s, clean prediction at t). At s = 0 the
/// result is the clean prediction itself.
pub fn euler_step<D: Denoiser>(
    d: &D,
    sched: &NoiseSchedule,
    x_t: &Tensor,
    t: f64,
    s: f64,
) -> Result<(Tensor, Tensor)> {
    check_step(sched, t, s)?;
    let sigma_t = sched.sigma(t)?;
    let x_hat = d.denoise(x_t, sigma_t)?;
    if s == 0.0 {
        return Ok((x_hat.clone(), x_hat));
    }
    // x_s = x_t + (s−t)·(x_t − x̂)/t
    let d1 = x_t.sub(&x_hat)?.scale(1.0 / t)?;
    let x_s = x_t.add(&d1.scale(s - t)?)?;
    Ok((x_s, x_hat))
}

/// One Heun (trapezoidal) step t → s: Euler predictor, then average of the
/// endpoint derivatives. The step to s = 0 falls back to Euler because the
/// derivative is not defined at sigma = 0.
pub fn heun_step<D: Denoiser>(
    d: &D,
    sched: &NoiseSchedule,
    x_t: &Tensor,
    t: f64,
    s: f64,
) -> Result<(Tensor, Tensor)> {
    check_step(sched, t, s)?;
    let sigma_t = sched.sigma(t)?;
    let x_hat = d.denoise(x_t, sigma_t)?;
    if s == 0.0 {
        return Ok((x_hat.clone(), x_hat));
    }
    let d1 = x_t.sub(&x_hat)?.scale(1.0 / t)?;
    let x_pred = x_t.add(&d1.scale(s - t)?)?;
    let sigma_s = sched.sigma(s)?;
    let x_hat_pred = d.denoise(&x_pred, sigma_s)?;
    let d2 = x_pred.sub(&x_hat_pred)?.scale(1.0 / s)?;
    let x_s = x_t.add(&d1.add(&d2)?.scale(0.5 * (s - t))?)?;
    Ok((x_s, x_hat))
}

pub fn solver_step<D: Denoiser>(
    solver: Solver,
    d: &D,
    sched: &NoiseSchedule,
    x_t: &Tensor,
    t: f64,
    s: f64,
) -> Result<(Tensor, Tensor)> {
    match solver {
        Solver::Euler => euler_step(d, sched, x_t, t, s),
        Solver::Heun => heun_step(d, sched, x_t, t, s),
    }
}

/// Closed-form probability-flow map for isotropic Gaussian data N(0, s²I):
/// x(t_to) = x(t_from) · sqrt((s² + t_to²)/(s² + t_from²)). The reference for
/// solver-order measurements.
pub fn exact_gauss_map(x: &[f64], data_std: f64, t_from: f64, t_to: f64) -> Vec<f64> {
    let s2 = data_std * data_std;
    let r = ((s2 + t_to * t_to) / (s2 + t_from * t_from)).sqrt();
    x.iter().map(|&v| v * r).collect()
}

/// Uniform partition boundaries t_i = t_max·i/K for i = 0..=K (ascending).
pub fn partition_times(sched: &NoiseSchedule, k: u32) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(DiffusionError::InvalidK { k });
    }
    let t_max = sched.t_max();
    Ok((0..=k).map(|i| t_max * i as f64 / k as f64).collect())
}

/// A recorded sampler run. `timesteps` is decreasing (t_{K−1} … t_0 = 0);
/// `states[j]` is the state at `timesteps[j]` and `cleans[j]` the clean
/// prediction produced by the step that landed there. The terminal noise
/// draw x_{t_K} is kept separately.
pub struct Trajectory {
    pub timesteps: Vec<f64>,
    pub states: Vec<Tensor>,
    pub cleans: Vec<Tensor>,
    pub initial: Tensor,
    pub k: u32,
    pub grad: Option<GradBinding>,
}

/// Tape plumbing for the single gradient-carrying step (the one producing
/// x_{t_m}): the tracked state/clean tensors and the bound network whose
/// leaves receive gradients.
pub struct GradBinding {
    pub index: usize,
    pub state: Tensor,
    pub clean: Tensor,
    pub net: BoundDenoiserNet,
    pub tape: Tape,
}

impl Trajectory {
    /// State at partition boundary i (0 ≤ i < K; boundary K is `initial`).
    pub fn state_at(&self, i: usize) -> Option<&Tensor> {
        let k = self.k as usize;
        if i < k {
            Some(&self.states[k - 1 - i])
        } else if i == k {
            Some(&self.initial)
        } else {
            None
        }
    }

    /// Clean prediction associated with boundary i (0 ≤ i < K).
    pub fn clean_at(&self, i: usize) -> Option<&Tensor> {
        let k = self.k as usize;
        if i < k {
            Some(&self.cleans[k - 1 - i])
        } else {
            None
        }
    }
}

/// Sample x_{t_K} ~ N(0, sigma(t_max)² I) and integrate down to t = 0 in K
/// solver steps, recording every boundary state. With `grad_step = Some(m)`,
/// the step producing x_{t_m} is re-executed with `net` bound to a fresh tape
/// (bit-identical values, now differentiable w.r.t. the parameters).
pub fn sample_trajectory<R: Rng + ?Sized>(
    net: &DenoiserNet,
    k_arg: Option<u32>,
    sched: &NoiseSchedule,
    k: u32,
    batch: usize,
    solver: Solver,
    grad_step: Option<usize>,
    rng: &mut R,
) -> Result<Trajectory> {
    if let Some(m) = grad_step {
        if k > 0 && m >= k as usize {
            return Err(DiffusionError::GradStepOutOfRange { index: m, k });
        }
    }
    let nd = NetDenoiser { net, k: k_arg };
    let mut traj = record_trajectory(&nd, sched, k, batch, solver, rng)?;
    if let Some(m) = grad_step {
        // Re-run the one gradient-carrying step with tracked parameters.
        // The shared forward path makes the tracked values bit-identical to
        // the recorded ones.
        let times = partition_times(sched, k)?;
        let x_from = traj.state_at(m + 1).expect("grad step within range").clone();
        let tape = Tape::new();
        let bound = net.bind(&tape)?;
        let bd = BoundNetDenoiser {
            net: &bound,
            k: k_arg,
        };
        let (gx, gclean) = solver_step(solver, &bd, sched, &x_from, times[m + 1], times[m])?;
        traj.grad = Some(GradBinding {
            index: m,
            state: gx,
            clean: gclean,
            net: bound,
            tape,
        });
    }
    Ok(traj)
}

/// Record a K-step sampler run for any denoiser (network-backed or analytic)
/// without gradient plumbing: the building block behind [`sample_trajectory`]
/// and the calibration rollouts used by evaluation.
pub fn record_trajectory<D: Denoiser, R: Rng + ?Sized>(
    d: &D,
    sched: &NoiseSchedule,
    k: u32,
    batch: usize,
    solver: Solver,
    rng: &mut R,
) -> Result<Trajectory> {
    if k == 0 {
        return Err(DiffusionError::InvalidK { k });
    }
    if batch == 0 {
        return Err(DiffusionError::EmptyBatch);
    }
    let dim = d.dim();
    let sigma_max = sched.max_sigma();
    let mut init = vec![0.0; batch * dim];
    for v in init.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sigma_max * z;
    }
    let initial = Tensor::matrix(batch, dim, init)?;

    let times = partition_times(sched, k)?;

    let mut timesteps = Vec::with_capacity(k as usize);
    let mut states: Vec<Tensor> = Vec::with_capacity(k as usize);
    let mut cleans: Vec<Tensor> = Vec::with_capacity(k as usize);

    let mut x = initial.clone();
    for i in (0..k as usize).rev() {
        let (t, s) = (times[i + 1], times[i]);
        let (x_s, x_hat) = solver_step(solver, d, sched, &x, t, s)?;
        timesteps.push(s);
        states.push(x_s.clone());
        cleans.push(x_hat);
        x = x_s;
    }

    Ok(Trajectory {
        timesteps,
        states,
        cleans,
        initial,
        k,
        grad: None,
    })
}

/// Plain multi-step sampling to t = 0 for evaluation: returns the final
/// clean batch (row-major batch x d).
pub fn sample_final<D: Denoiser, R: Rng + ?Sized>(
    d: &D,
    sched: &NoiseSchedule,
    k: u32,
    batch: usize,
    solver: Solver,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(DiffusionError::InvalidK { k });
    }
    if batch == 0 {
        return Err(DiffusionError::EmptyBatch);
    }
    let dim = d.dim();
    let sigma_max = sched.max_sigma();
    let mut init = vec![0.0; batch * dim];
    for v in init.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sigma_max * z;
    }
    let mut x = Tensor::matrix(batch, dim, init)?;
    let times = partition_times(sched, k)?;
    for i in (0..k as usize).rev() {
        let (x_s, _) = solver_step(solver, d, sched, &x, times[i + 1], times[i])?;
        x = x_s;
    }
    Ok(x.data().to_vec())
}
