use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tdm_autodiff::{AdamW, AdamWConfig, Tape, Tensor};
use tdm_diffusion::{DenoiserNet, DiffusedMixture, GaussianMixture, NetConfig, Role, SigmaQuery};

use crate::error::{DistillError, Result};
use crate::losses::l2_loss;

/// Score of the equal-weight blend of two diffused populations:
///
/// ```text
/// s*(x) = ( p1(x) s1(x) + p2(x) s2(x) ) / ( p1(x) + p2(x) )
/// ```
///
/// This is the stationary point a single score model reaches when it is
/// trained on samples from both populations, and equals the score of their
/// pooled mixture.  Evaluated via the responsibility `r1 = p1 / (p1 + p2)`
/// computed in log space, so widely separated densities do not underflow.
pub fn shared_fake_optimum(
    p1: &DiffusedMixture,
    p2: &DiffusedMixture,
    x: &[f64],
) -> Result<Vec<f64>> {
    if p1.dim() != p2.dim() {
        return Err(DistillError::DataShape { expected: p1.dim(), got: p2.dim() });
    }
    if x.len() != p1.dim() {
        return Err(DistillError::DataShape { expected: p1.dim(), got: x.len() });
    }
    let l1 = p1.log_density(x);
    let l2 = p2.log_density(x);
    if !l1.is_finite() && !l2.is_finite() {
        return Err(DistillError::DegenerateDensity);
    }
    let r1 = if l1 >= l2 {
        1.0 / (1.0 + (l2 - l1).exp())
    } else {
        let e = (l1 - l2).exp();
        e / (1.0 + e)
    };
    let s1 = p1.score(x);
    let s2 = p2.score(x);
    Ok(s1
        .iter()
        .zip(&s2)
        .map(|(a, b)| r1 * a + (1.0 - r1) * b)
        .collect())
}

#[derive(Debug, Clone)]
pub struct SharedFakeOptions {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    /// The single noise level the regression is trained at.
    pub sigma_tau: f64,
    pub log_every: usize,
}

impl Default for SharedFakeOptions {
    fn default() -> Self {
        SharedFakeOptions {
            hidden_width: 64,
            hidden_layers: 3,
            iters: 4000,
            batch: 256,
            lr: 1e-3,
            sigma_tau: 0.5,
            log_every: 200,
        }
    }
}

pub struct SharedFakeRun {
    pub net: DenoiserNet,
    /// (iteration, loss) pairs at the logging cadence.
    pub losses: Vec<(usize, f64)>,
}

/// Trains one denoiser on an equal mix of two clean populations diffused to a
/// single noise level — the regression a shared fake score model faces when
/// two sampler branches feed the same network.  Its optimum is the blended
/// score returned by [`shared_fake_optimum`], not either branch's own score.
pub fn train_shared_fake(
    branch1: &GaussianMixture,
    branch2: &GaussianMixture,
    opts: &SharedFakeOptions,
    seed: u64,
) -> Result<SharedFakeRun> {
    if branch1.dim() != branch2.dim() {
        return Err(DistillError::DataShape { expected: branch1.dim(), got: branch2.dim() });
    }
    if opts.iters == 0 || opts.batch == 0 {
        return Err(DistillError::InvalidConfig {
            reason: "iters and batch must be positive".into(),
        });
    }
    if !(opts.sigma_tau.is_finite() && opts.sigma_tau > 0.0) {
        return Err(DistillError::InvalidConfig {
            reason: format!("sigma_tau must be positive, got {}", opts.sigma_tau),
        });
    }
    let dim = branch1.dim();
    // Preconditioner scale of the pooled population the net actually sees:
    // Var[pool] = 1/2 (C1 + mu1 mu1^T) + 1/2 (C2 + mu2 mu2^T) - mubar mubar^T.
    let (m1, m2) = (branch1.mean(), branch2.mean());
    let (c1, c2) = (branch1.covariance(), branch2.covariance());
    let mut pooled_trace = 0.0;
    for j in 0..dim {
        let mbar = 0.5 * (m1[j] + m2[j]);
        pooled_trace += 0.5 * (c1[j * dim + j] + m1[j] * m1[j])
            + 0.5 * (c2[j * dim + j] + m2[j] * m2[j])
            - mbar * mbar;
    }
    let cfg = NetConfig {
        data_dim: dim,
        hidden_width: opts.hidden_width,
        hidden_layers: opts.hidden_layers,
        data_std: (pooled_trace / dim as f64).sqrt(),
        k_cond: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DenoiserNet::init(cfg, Role::Fake, &mut rng)?;
    let mut opt = AdamW::new(AdamWConfig::with_lr(opts.lr))?;
    let mut losses = Vec::new();

    for it in 0..opts.iters {
        // Cosine decay: constant-rate AdamW with beta1 = 0 bounces around
        // the optimum, and this regression's test is its final accuracy.
        let progress = it as f64 / opts.iters as f64;
        opt.set_lr(opts.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))?;
        let mut x0 = vec![0.0; opts.batch * dim];
        for row in x0.chunks_exact_mut(dim) {
            let branch = if rng.random::<f64>() < 0.5 { branch1 } else { branch2 };
            row.copy_from_slice(&branch.sample(1, &mut rng));
        }
        let mut x_tau = x0.clone();
        for v in x_tau.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += opts.sigma_tau * z;
        }
        let tape = Tape::new();
        let bound = net.bind(&tape)?;
        let x = Tensor::matrix(opts.batch, dim, x_tau)?;
        let target = Tensor::matrix(opts.batch, dim, x0)?;
        let pred = bound.forward(&x, SigmaQuery::Shared(opts.sigma_tau), None)?;
        let loss = l2_loss(&pred, &target)?;
        let value = loss.item()?;
        let grads = bound.grads(&loss.backward()?);
        opt.step(net.params_mut(), &grads)?;
        if it % opts.log_every == 0 || it + 1 == opts.iters {
            losses.push((it, value));
        }
    }
    Ok(SharedFakeRun { net, losses })
}
