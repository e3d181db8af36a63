//! Sliced transport distance between two sample sets.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{MetricsError, Result};

fn check_set(name: &str, x: &[f64], dim: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    if x.len() % dim != 0 {
        return Err(MetricsError::RaggedSamples { len: x.len(), dim });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite { what: format!("sample set {name}") });
    }
    Ok(x.len() / dim)
}

/// Exact squared 1-D W2 between two empirical measures given as sorted
/// value lists (sizes may differ):
///
/// ```text
/// W2^2 = integral over u in [0,1] of ( Qa(u) - Qb(u) )^2 du
/// ```
///
/// Both quantile functions are piecewise constant, so the integral is a sum
/// over the merged breakpoint segments.
fn w2_sq_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while ia < a.len() && ib < b.len() {
        let next_a = (ia + 1) as f64 / na;
        let next_b = (ib + 1) as f64 / nb;
        let next = next_a.min(next_b);
        let diff = a[ia] - b[ib];
        acc += (next - u) * diff * diff;
        if next_a <= next {
            ia += 1;
        }
        if next_b <= next {
            ib += 1;
        }
        u = next;
    }
    acc.max(0.0)
}

/// Mean over `n_projections` random unit directions of the exact 1-D W2
/// between the projected sample sets. Both sets are row-major with `dim`
/// columns; sizes may differ (quantile functions are compared exactly).
///
/// Sets of at least ~100 samples each are recommended so the empirical
/// quantiles are meaningful; only empty sets are rejected.
pub fn sliced_wasserstein<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    dim: usize,
    n_projections: usize,
    rng: &mut R,
) -> Result<f64> {
    if dim == 0 {
        return Err(MetricsError::InvalidArgument { reason: "dim must be positive".into() });
    }
    if n_projections == 0 {
        return Err(MetricsError::InvalidArgument {
            reason: "n_projections must be positive".into(),
        });
    }
    let na = check_set("a", a, dim)?;
    let nb = check_set("b", b, dim)?;

    let mut pa = vec![0.0; na];
    let mut pb = vec![0.0; nb];
    let mut theta = vec![0.0; dim];
    let mut total = 0.0;
    for _ in 0..n_projections {
        loop {
            let mut norm_sq = 0.0;
            for v in theta.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = z;
                norm_sq += z * z;
            }
            if norm_sq > 1e-24 {
                let inv = norm_sq.sqrt().recip();
                for v in theta.iter_mut() {
                    *v *= inv;
                }
                break;
            }
        }
        for (p, row) in pa.iter_mut().zip(a.chunks_exact(dim)) {
            *p = row.iter().zip(&theta).map(|(x, t)| x * t).sum();
        }
        for (p, row) in pb.iter_mut().zip(b.chunks_exact(dim)) {
            *p = row.iter().zip(&theta).map(|(x, t)| x * t).sum();
        }
        pa.sort_by(|x, y| x.total_cmp(y));
        pb.sort_by(|x, y| x.total_cmp(y));
        total += w2_sq_sorted(&pa, &pb).sqrt();
    }
    Ok(total / n_projections as f64)
}
