use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DistillError, Result};

/// Draws an intermediate time from the interval `(t_lo, t_hi]`.
///
/// The lower endpoint is excluded: the proposal that diffuses a state at
/// `t_lo` up to `tau` needs strictly positive incremental variance, and when
/// `t_lo = 0` the time `tau = 0` carries no noise at all.  The upper endpoint
/// is reachable.
pub fn sample_tau(t_lo: f64, t_hi: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(t_lo.is_finite() && t_hi.is_finite() && 0.0 <= t_lo && t_lo < t_hi) {
        return Err(DistillError::InvalidConfig {
            reason: format!("tau interval must satisfy 0 <= t_lo < t_hi, got ({t_lo}, {t_hi})"),
        });
    }
    loop {
        let r: f64 = rng.random();
        let tau = t_hi - r * (t_hi - t_lo);
        if tau > t_lo && tau > 0.0 {
            return Ok(tau);
        }
    }
}

/// A batch diffused from trajectory states to a higher noise level, with the
/// importance weights that retarget it at the clean-prediction proposal.
#[derive(Debug, Clone)]
pub struct DiffusedBatch {
    /// Diffused points, `batch x dim` row-major.
    pub x_tau: Vec<f64>,
    /// Per-sample weights, already exponentiated and clipped.
    pub weights: Vec<f64>,
    pub sigma_state: f64,
    pub sigma_tau: f64,
}

impl DiffusedBatch {
    pub fn weight_mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len().max(1) as f64
    }

    pub fn weight_max(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// Log-density of an isotropic Gaussian with variance `var` per coordinate,
/// evaluated on one row.
fn log_gauss(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let d = x.len() as f64;
    let sq: f64 = x
        .iter()
        .zip(mean)
        .map(|(a, b)| {
            let r = a - b;
            r * r
        })
        .sum();
    -0.5 * d * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * sq / var
}

/// Importance weight of one diffused row: the density the fake-score loss
/// wants (full noise around the clean prediction) over the density it was
/// sampled from (incremental noise around the trajectory state), clipped
/// from above.
///
/// ```text
/// w = min( N(x_tau; x_clean, sigma_tau^2 I)
///        / N(x_tau; x_state, (sigma_tau^2 - sigma_state^2) I), clip )
/// ```
pub fn importance_weight(
    x_tau: &[f64],
    x_state: &[f64],
    x_clean: &[f64],
    sigma_state: f64,
    sigma_tau: f64,
    clip: f64,
) -> Result<f64> {
    if !(sigma_state.is_finite() && sigma_tau.is_finite() && sigma_state >= 0.0)
        || sigma_tau <= sigma_state
    {
        return Err(DistillError::NonIncreasingNoise { sigma_state, sigma_tau });
    }
    if x_tau.is_empty() || x_state.len() != x_tau.len() || x_clean.len() != x_tau.len() {
        return Err(DistillError::DataShape {
            expected: x_tau.len().max(1),
            got: x_state.len().min(x_clean.len()),
        });
    }
    let inc_var = sigma_tau * sigma_tau - sigma_state * sigma_state;
    let target = log_gauss(x_tau, x_clean, sigma_tau * sigma_tau);
    let proposal = log_gauss(x_tau, x_state, inc_var);
    // Clip in log space so a huge ratio never overflows the exponential,
    // then once more after so the ceiling is exact rather than off by an ulp.
    Ok((target - proposal).min(clip.ln()).exp().min(clip))
}

/// Diffuses trajectory states `x_state` (noise level `sigma_state`) up to
/// `sigma_tau` and attaches importance weights against the proposal centred
/// on the clean predictions `x_clean`:
///
/// ```text
/// x_tau = x_state + sqrt(sigma_tau^2 - sigma_state^2) * eps
/// w     = min( q(x_tau | x_clean, sigma_tau^2)
///            / q(x_tau | x_state, sigma_tau^2 - sigma_state^2), clip )
/// ```
///
/// Both densities are isotropic Gaussians; the ratio is computed in log space
/// before clipping.  When `importance` is false every weight is exactly 1.
/// At the terminal state (`sigma_state = 0`, where `x_clean == x_state`) the
/// two densities coincide and the weight is exactly 1 as well.
pub fn diffuse_from_trajectory(
    x_state: &[f64],
    x_clean: &[f64],
    dim: usize,
    sigma_state: f64,
    sigma_tau: f64,
    importance: bool,
    clip: f64,
    rng: &mut impl Rng,
) -> Result<DiffusedBatch> {
    if !(sigma_state.is_finite() && sigma_tau.is_finite() && sigma_state >= 0.0)
        || sigma_tau <= sigma_state
    {
        return Err(DistillError::NonIncreasingNoise { sigma_state, sigma_tau });
    }
    if dim == 0 || x_state.len() % dim != 0 || x_state.is_empty() {
        return Err(DistillError::DataShape { expected: dim.max(1), got: x_state.len() });
    }
    if x_clean.len() != x_state.len() {
        return Err(DistillError::DataShape { expected: x_state.len(), got: x_clean.len() });
    }
    let batch = x_state.len() / dim;
    let inc_std = (sigma_tau * sigma_tau - sigma_state * sigma_state).sqrt();

    let mut x_tau = vec![0.0; x_state.len()];
    let mut weights = vec![1.0; batch];
    for b in 0..batch {
        let row = &mut x_tau[b * dim..(b + 1) * dim];
        for (j, slot) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *slot = x_state[b * dim + j] + inc_std * z;
        }
        if importance {
            weights[b] = importance_weight(
                row,
                &x_state[b * dim..(b + 1) * dim],
                &x_clean[b * dim..(b + 1) * dim],
                sigma_state,
                sigma_tau,
                clip,
            )?;
        }
    }
    Ok(DiffusedBatch { x_tau, weights, sigma_state, sigma_tau })
}
