//! Denoiser network: a SiLU MLP wrapped in scale-preserving preconditioning.
//!
//! The network predicts the clean sample from a noisy one:
//!
//! ```text
//! f(x, sigma) = c_skip(sigma)·x + c_out(sigma)·mlp(c_in(sigma)·x, emb(sigma), emb(K))
//! c_in  = 1/sqrt(sigma^2 + s^2)      c_skip = s^2/(sigma^2 + s^2)
//! c_out = sigma·s/sqrt(sigma^2 + s^2)
//! ```
//!
//! with s the data standard deviation. Two consequences the rest of the
//! workspace relies on:
//! - with the final layer zero-initialized, the initial network is the exact
//!   posterior-mean denoiser of an isotropic Gaussian with variance s^2;
//! - the K-conditioning rows of the first layer are zero-initialized, so a
//!   student cloned from a K-unconditioned teacher computes bit-identical
//!   outputs for every K until training moves those rows.
//!
//! Noise level enters as sinusoidal features of ln(sigma); the step count K
//! enters as sinusoidal features of K itself (zeroed when conditioning is
//! disabled).

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use tdm_autodiff::{Gradients, Tape, Tensor};

use crate::error::{DiffusionError, Result};

pub const TIME_EMB_DIM: usize = 8;
pub const K_EMB_DIM: usize = 4;
const TIME_FREQS: [f64; TIME_EMB_DIM / 2] = [0.25, 0.5, 1.0, 2.0];
const K_FREQS: [f64; K_EMB_DIM / 2] = [0.3, 0.7];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Teacher,
    Student,
    Fake,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Teacher => "teacher",
            Role::Student => "student",
            Role::Fake => "fake",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "teacher" => Some(Role::Teacher),
            "student" => Some(Role::Student),
            "fake" => Some(Role::Fake),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub data_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Preconditioner scale; match the data distribution's std.
    pub data_std: f64,
    /// Whether the K embedding carries signal (false zeroes the features).
    pub k_cond: bool,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.data_dim == 0 || self.hidden_width == 0 || self.hidden_layers == 0 {
            return Err(DiffusionError::InvalidMixture {
                reason: "network dimensions must be >= 1".into(),
            });
        }
        if !self.data_std.is_finite() || self.data_std <= 0.0 {
            return Err(DiffusionError::InvalidMixture {
                reason: format!("data_std must be positive, got {}", self.data_std),
            });
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.data_dim + TIME_EMB_DIM + K_EMB_DIM
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Arc<Vec<f64>>, // in_dim x out_dim, row-major
    pub b: Arc<Vec<f64>>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// Noise level for one forward call: one shared sigma or one per sample.
#[derive(Debug, Clone, Copy)]
pub enum SigmaQuery<'a> {
    Shared(f64),
    PerSample(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct DenoiserNet {
    cfg: NetConfig,
    role: Role,
    layers: Vec<Linear>,
}

fn time_features(sigma: f64, out: &mut [f64]) {
    let u = sigma.ln();
    for (i, &f) in TIME_FREQS.iter().enumerate() {
        out[2 * i] = (f * u).sin();
        out[2 * i + 1] = (f * u).cos();
    }
}

fn k_features(k: Option<u32>, out: &mut [f64]) {
    match k {
        None => out.fill(0.0),
        Some(k) => {
            let kf = k as f64;
            for (i, &f) in K_FREQS.iter().enumerate() {
                out[2 * i] = (f * kf).sin();
                out[2 * i + 1] = (f * kf).cos();
            }
        }
    }
}

impl DenoiserNet {
    pub fn init<R: Rng + ?Sized>(cfg: NetConfig, role: Role, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut dims = Vec::with_capacity(cfg.hidden_layers + 1);
        dims.push(cfg.input_dim());
        for _ in 0..cfg.hidden_layers {
            dims.push(cfg.hidden_width);
        }
        dims.push(cfg.data_dim);

        let n_layers = dims.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (in_dim, out_dim) = (dims[l], dims[l + 1]);
            let mut w = vec![0.0; in_dim * out_dim];
            if l + 1 < n_layers {
                let std = (1.0 / in_dim as f64).sqrt();
                for v in w.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = std * z;
                }
                if l == 0 {
                    // zero the K-feature rows so K-conditioning starts inert
                    let k_row0 = cfg.data_dim + TIME_EMB_DIM;
                    for r in k_row0..in_dim {
                        w[r * out_dim..(r + 1) * out_dim].fill(0.0);
                    }
                }
            }
            // final layer stays all-zero: initial net = preconditioner skip
            layers.push(Linear {
                w: Arc::new(w),
                b: Arc::new(vec![0.0; out_dim]),
                in_dim,
                out_dim,
            });
        }
        Ok(Self { cfg, role, layers })
    }

    /// All-zero parameters: the network computes exactly the preconditioner
    /// skip term c_skip(sigma)·x. Used by the checkpoint decoder and as the
    /// zero-capacity baseline in tests.
    pub fn zeroed(cfg: NetConfig, role: Role) -> Result<Self> {
        cfg.validate()?;
        let mut dims = Vec::with_capacity(cfg.hidden_layers + 2);
        dims.push(cfg.input_dim());
        for _ in 0..cfg.hidden_layers {
            dims.push(cfg.hidden_width);
        }
        dims.push(cfg.data_dim);
        let layers = dims
            .windows(2)
            .map(|w| Linear {
                w: Arc::new(vec![0.0; w[0] * w[1]]),
                b: Arc::new(vec![0.0; w[1]]),
                in_dim: w[0],
                out_dim: w[1],
            })
            .collect();
        Ok(Self { cfg, role, layers })
    }

    /// Rebuild a network from its flattened parameters (canonical order).
    pub fn from_parts(cfg: NetConfig, role: Role, flat: &[f64]) -> Result<Self> {
        let mut net = Self::zeroed(cfg, role)?;
        net.load_params(flat)?;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    /// Clone the weights into a new role (student/fake initialization from a
    /// trained teacher), optionally enabling K-conditioning.
    pub fn clone_as(&self, role: Role, k_cond: bool) -> Self {
        let mut out = self.clone();
        out.role = role;
        out.cfg.k_cond = k_cond;
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Parameter buffers in canonical order (w0, b0, w1, b1, ...); the same
    /// order used by `BoundDenoiserNet::grads`, checkpoints, and optimizers.
    pub fn params_mut(&mut self) -> Vec<&mut Arc<Vec<f64>>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn load_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(DiffusionError::InvalidMixture {
                reason: format!(
                    "parameter count mismatch: net has {}, got {}",
                    self.param_count(),
                    flat.len()
                ),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let wlen = l.w.len();
            *Arc::make_mut(&mut l.w) = flat[off..off + wlen].to_vec();
            off += wlen;
            let blen = l.b.len();
            *Arc::make_mut(&mut l.b) = flat[off..off + blen].to_vec();
            off += blen;
        }
        Ok(())
    }

    /// Frozen-parameter forward (no tape involvement unless `x` is tracked).
    pub fn forward(&self, x: &Tensor, sigma: SigmaQuery, k: Option<u32>) -> Result<Tensor> {
        let layer_tensors: Vec<(Tensor, Tensor)> = self
            .layers
            .iter()
            .map(|l| {
                Ok((
                    Tensor::from_shared(vec![l.in_dim, l.out_dim], l.w.clone())?,
                    Tensor::from_shared(vec![l.out_dim], l.b.clone())?,
                ))
            })
            .collect::<Result<_>>()?;
        forward_impl(&self.cfg, &layer_tensors, x, sigma, k)
    }

    /// Bind parameters as tracked leaves on `tape` for a training step.
    pub fn bind(&self, tape: &Tape) -> Result<BoundDenoiserNet> {
        let leaves: Vec<(Tensor, Tensor)> = self
            .layers
            .iter()
            .map(|l| {
                Ok((
                    Tensor::leaf_shared(tape, vec![l.in_dim, l.out_dim], l.w.clone())?,
                    Tensor::leaf_shared(tape, vec![l.out_dim], l.b.clone())?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(BoundDenoiserNet {
            cfg: self.cfg,
            leaves,
        })
    }
}

/// A network whose parameters are tracked leaves on some tape. Forward passes
/// record gradients; `grads` extracts them in canonical parameter order.
pub struct BoundDenoiserNet {
    cfg: NetConfig,
    leaves: Vec<(Tensor, Tensor)>,
}

impl BoundDenoiserNet {
    pub fn forward(&self, x: &Tensor, sigma: SigmaQuery, k: Option<u32>) -> Result<Tensor> {
        forward_impl(&self.cfg, &self.leaves, x, sigma, k)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// Per-buffer gradients aligned with `DenoiserNet::params_mut` order;
    /// buffers without flow come back as zeros.
    pub fn grads(&self, g: &Gradients) -> Vec<Vec<f64>> {
        self.leaves
            .iter()
            .flat_map(|(w, b)| [g.wrt_or_zeros(w), g.wrt_or_zeros(b)])
            .collect()
    }
}

/// One numeric path shared by frozen and tracked forwards, so both produce
/// bit-identical values for identical inputs.
fn forward_impl(
    cfg: &NetConfig,
    layers: &[(Tensor, Tensor)],
    x: &Tensor,
    sigma: SigmaQuery,
    k: Option<u32>,
) -> Result<Tensor> {
    if cfg.k_cond != k.is_some() {
        return Err(DiffusionError::KConditioningMismatch {
            net_k_cond: cfg.k_cond,
            k_given: k.is_some(),
        });
    }
    let (batch, d) = match x.shape() {
        [b, d] if *d == cfg.data_dim => (*b, *d),
        other => {
            return Err(DiffusionError::InvalidMixture {
                reason: format!(
                    "input shape {other:?} does not match data_dim {}",
                    cfg.data_dim
                ),
            })
        }
    };
    if batch == 0 {
        return Err(DiffusionError::EmptyBatch);
    }

    // per-sample preconditioner factors and embedding rows
    let s = cfg.data_std;
    let mut c_in = vec![0.0; batch];
    let mut c_skip = vec![0.0; batch];
    let mut c_out = vec![0.0; batch];
    let emb_cols = TIME_EMB_DIM + K_EMB_DIM;
    let mut emb = vec![0.0; batch * emb_cols];
    let mut kfeat = [0.0; K_EMB_DIM];
    k_features(k, &mut kfeat);
    let fill_row = |sg: f64,
                    c_in: &mut f64,
                    c_skip: &mut f64,
                    c_out: &mut f64,
                    emb_row: &mut [f64]|
     -> Result<()> {
        if !sg.is_finite() || sg <= 0.0 {
            return Err(DiffusionError::NonPositiveSigma { sigma: sg });
        }
        let denom = sg * sg + s * s;
        *c_in = 1.0 / denom.sqrt();
        *c_skip = s * s / denom;
        *c_out = sg * s / denom.sqrt();
        time_features(sg, &mut emb_row[..TIME_EMB_DIM]);
        emb_row[TIME_EMB_DIM..].copy_from_slice(&kfeat);
        Ok(())
    };
    match sigma {
        SigmaQuery::Shared(sg) => {
            let mut row0 = vec![0.0; emb_cols];
            let (mut ci, mut cs, mut co) = (0.0, 0.0, 0.0);
            fill_row(sg, &mut ci, &mut cs, &mut co, &mut row0)?;
            c_in.fill(ci);
            c_skip.fill(cs);
            c_out.fill(co);
            for row in emb.chunks_exact_mut(emb_cols) {
                row.copy_from_slice(&row0);
            }
        }
        SigmaQuery::PerSample(sgs) => {
            if sgs.len() != batch {
                return Err(DiffusionError::NoiseLength {
                    expected: batch,
                    got: sgs.len(),
                });
            }
            for (i, &sg) in sgs.iter().enumerate() {
                let row = &mut emb[i * emb_cols..(i + 1) * emb_cols];
                fill_row(sg, &mut c_in[i], &mut c_skip[i], &mut c_out[i], row)?;
            }
        }
    }

    let c_in_t = Tensor::vector(c_in)?;
    let c_skip_t = Tensor::vector(c_skip)?;
    let c_out_t = Tensor::vector(c_out)?;
    let emb_t = Tensor::matrix(batch, emb_cols, emb)?;

    let x_in = x.scale_rows(&c_in_t)?;
    let mut h = Tensor::concat_cols(&[&x_in, &emb_t])?;
    let last = layers.len() - 1;
    for (i, (w, b)) in layers.iter().enumerate() {
        h = h.matmul(w)?.add(b)?;
        if i < last {
            h = h.silu()?;
        }
    }
    debug_assert_eq!(h.shape(), &[batch, d]);

    let skip = x.scale_rows(&c_skip_t)?;
    Ok(skip.add(&h.scale_rows(&c_out_t)?)?)
}

/// Score implied by a denoiser output (value-level):
/// s(x, sigma) = −(x − f)/sigma^2.
pub fn score_from_denoiser(x: &[f64], f: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(DiffusionError::NonPositiveSigma { sigma });
    }
    if x.len() != f.len() {
        return Err(DiffusionError::NoiseLength {
            expected: x.len(),
            got: f.len(),
        });
    }
    let s2 = sigma * sigma;
    Ok(x.iter().zip(f).map(|(&xi, &fi)| (fi - xi) / s2).collect())
}
