use tdm_autodiff::Tensor;
use tdm_diffusion::{BoundDenoiserNet, SigmaQuery};

use crate::config::LambdaRule;
use crate::error::{DistillError, Result};

/// Mean over the batch of the squared residual norm:
///
/// ```text
/// L = (1/B) * sum_b ||x_b - target_b||^2
/// ```
pub fn l2_loss(x: &Tensor, target: &Tensor) -> Result<Tensor> {
    let r = x.sub(target)?;
    Ok(r.mul(&r)?.row_sum()?.mean_all()?)
}

/// Mean over the batch of the pseudo-Huber penalty:
///
/// ```text
/// L = (1/B) * sum_b ( sqrt(||x_b - target_b||^2 + c^2) - c )
/// ```
///
/// For small residuals this behaves like `||r||^2 / (2c)` and for large ones
/// like `||r||`, so per-sample gradient norms saturate at 1 while the descent
/// direction stays exactly parallel to the squared loss.
pub fn huber_loss(x: &Tensor, target: &Tensor, c: f64) -> Result<Tensor> {
    if !(c.is_finite() && c > 0.0) {
        return Err(DistillError::InvalidConfig {
            reason: format!("huber constant must be positive and finite, got {c}"),
        });
    }
    let r = x.sub(target)?;
    let sq = r.mul(&r)?.row_sum()?;
    Ok(sq.add_scalar(c * c)?.sqrt_eps()?.add_scalar(-c)?.mean_all()?)
}

/// Builds the revised target the sampler state is pulled towards:
///
/// ```text
/// x~ = x + lambda * (s_real(x_tau, tau) - s_fake(x_tau, tau))
/// ```
///
/// Both scores come from denoiser outputs through
/// `s = (f - x_tau) / sigma_tau^2`, so with `lambda = sigma_tau^2` the
/// correction collapses to `f_real - f_fake` and no division is needed.  The
/// `dmd-norm` rule further divides each row by its mean absolute denoiser
/// difference, normalising the correction to unit scale.
///
/// The result is plain data: the target is treated as a constant during the
/// generator update, so no tape is attached.
pub fn revised_target(
    x_base: &[f64],
    f_real: &[f64],
    f_fake: &[f64],
    dim: usize,
    rule: LambdaRule,
) -> Result<Vec<f64>> {
    if dim == 0 || x_base.len() % dim != 0 {
        return Err(DistillError::DataShape { expected: dim.max(1), got: x_base.len() });
    }
    if f_real.len() != x_base.len() || f_fake.len() != x_base.len() {
        return Err(DistillError::DataShape {
            expected: x_base.len(),
            got: f_real.len().max(f_fake.len()),
        });
    }
    let mut out = vec![0.0; x_base.len()];
    let batch = x_base.len() / dim;
    for b in 0..batch {
        let lo = b * dim;
        let hi = lo + dim;
        let scale = match rule {
            LambdaRule::Sigma2 => 1.0,
            LambdaRule::DmdNorm => {
                let mean_abs = f_real[lo..hi]
                    .iter()
                    .zip(&f_fake[lo..hi])
                    .map(|(r, f)| (r - f).abs())
                    .sum::<f64>()
                    / dim as f64;
                1.0 / (mean_abs + 1e-12)
            }
        };
        for j in lo..hi {
            out[j] = x_base[j] + scale * (f_real[j] - f_fake[j]);
        }
    }
    Ok(out)
}

/// Weighted regression loss for the fake denoiser: predict the clean states
/// that generated the diffused batch.
///
/// ```text
/// L = (1/B) * sum_b w_b * ||f_fake(x_tau_b, sigma_tau) - x_clean_b||^2
/// ```
///
/// `x_tau` and `x_clean` enter as constants; only the bound net parameters
/// are differentiated.
pub fn fake_score_loss(
    fake: &BoundDenoiserNet,
    x_tau: &[f64],
    x_clean: &[f64],
    weights: &[f64],
    sigma_tau: f64,
    k: Option<u32>,
) -> Result<Tensor> {
    let dim = fake.config().data_dim;
    if x_tau.len() != x_clean.len() || x_tau.is_empty() || x_tau.len() % dim != 0 {
        return Err(DistillError::DataShape { expected: x_tau.len().max(dim), got: x_clean.len() });
    }
    let batch = x_tau.len() / dim;
    if weights.len() != batch {
        return Err(DistillError::DataShape { expected: batch, got: weights.len() });
    }
    let x = Tensor::matrix(batch, dim, x_tau.to_vec())?;
    let target = Tensor::matrix(batch, dim, x_clean.to_vec())?;
    let w = Tensor::vector(weights.to_vec())?;
    let pred = fake.forward(&x, SigmaQuery::Shared(sigma_tau), k)?;
    let r = pred.sub(&target)?;
    Ok(r.mul(&r)?.row_sum()?.mul(&w)?.mean_all()?)
}
