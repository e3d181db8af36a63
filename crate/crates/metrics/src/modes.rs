//! Nearest-mode assignment and coverage accounting.

use tdm_diffusion::GaussianMixture;

use crate::error::{MetricsError, Result};

/// Default capture radius around each mode, in component standard deviations.
pub const DEFAULT_MODE_RADIUS_STD: f64 = 3.0;
/// A mode counts as covered when it receives at least this fraction of all
/// samples.
pub const COVERAGE_SHARE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct ModeCoverage {
    /// Samples captured per mode (nearest mean within the radius).
    pub counts: Vec<usize>,
    /// Indices of modes holding at least [`COVERAGE_SHARE`] of all samples.
    pub covered: Vec<usize>,
    /// Samples assigned to any mode.
    pub assigned: usize,
    /// Total samples examined.
    pub n: usize,
}

impl ModeCoverage {
    pub fn covered_count(&self) -> usize {
        self.covered.len()
    }

    pub fn assigned_fraction(&self) -> f64 {
        self.assigned as f64 / self.n as f64
    }
}

/// Assigns every sample to its nearest component mean, counting it only when
/// it lies within `radius_in_std` of that component's average per-dimension
/// standard deviation. A mode is covered when it captures at least 1% of all
/// samples.
pub fn mode_coverage(
    samples: &[f64],
    gmm: &GaussianMixture,
    radius_in_std: f64,
) -> Result<ModeCoverage> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let d = gmm.dim();
    if samples.len() % d != 0 {
        return Err(MetricsError::RaggedSamples { len: samples.len(), dim: d });
    }
    if !(radius_in_std.is_finite() && radius_in_std > 0.0) {
        return Err(MetricsError::InvalidArgument {
            reason: format!("radius_in_std must be positive, got {radius_in_std}"),
        });
    }
    let means = gmm.means();
    let radii: Vec<f64> = (0..gmm.n_components())
        .map(|i| {
            let cov = gmm.component_cov(i);
            let mean_var = (0..d).map(|j| cov[j * d + j]).sum::<f64>() / d as f64;
            radius_in_std * mean_var.sqrt()
        })
        .collect();

    let n = samples.len() / d;
    let mut counts = vec![0usize; means.len()];
    let mut assigned = 0usize;
    for row in samples.chunks_exact(d) {
        let mut best = 0usize;
        let mut best_sq = f64::INFINITY;
        for (m, mean) in means.iter().enumerate() {
            let sq: f64 = row.iter().zip(mean).map(|(x, mu)| (x - mu) * (x - mu)).sum();
            if sq < best_sq {
                best_sq = sq;
                best = m;
            }
        }
        if best_sq.sqrt() <= radii[best] {
            counts[best] += 1;
            assigned += 1;
        }
    }
    let need = (COVERAGE_SHARE * n as f64).ceil() as usize;
    let covered = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= need.max(1))
        .map(|(i, _)| i)
        .collect();
    Ok(ModeCoverage { counts, covered, assigned, n })
}
