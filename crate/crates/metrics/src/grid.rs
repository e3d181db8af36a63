//! Histogram-vs-quadrature divergence on a regular grid.

use rand::Rng;
use rand_distr::StandardNormal;
use libm::erfc;
use tdm_diffusion::GaussianMixture;

use crate::error::{MetricsError, Result};

pub const DEFAULT_GRID_RESOLUTION: usize = 64;
/// Half-width of auto-fitted grids, in per-dimension diffused standard
/// deviations around the component means.
pub const GRID_STD_SPAN: f64 = 4.0;

/// Axis-aligned regular grid: per-dimension bounds, one shared resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    mins: Vec<f64>,
    maxs: Vec<f64>,
    resolution: usize,
}

impl GridSpec {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>, resolution: usize) -> Result<Self> {
        if mins.is_empty() || mins.len() != maxs.len() {
            return Err(MetricsError::InvalidGrid {
                reason: format!("bounds have lengths {} and {}", mins.len(), maxs.len()),
            });
        }
        if mins.len() > 3 {
            return Err(MetricsError::InvalidGrid {
                reason: format!("cell storage is exponential in dim; got dim {}", mins.len()),
            });
        }
        if resolution < 16 {
            return Err(MetricsError::InvalidGrid {
                reason: format!("resolution must be at least 16, got {resolution}"),
            });
        }
        for (lo, hi) in mins.iter().zip(&maxs) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(MetricsError::InvalidGrid {
                    reason: format!("bad bound pair [{lo}, {hi}]"),
                });
            }
        }
        Ok(Self { mins, maxs, resolution })
    }

    /// Fits bounds around a mixture diffused to noise level `sigma`: every
    /// component mean padded by [`GRID_STD_SPAN`] per-dimension diffused
    /// standard deviations, which keeps well over 99.9% of the mass inside.
    pub fn for_diffused(gmm: &GaussianMixture, sigma: f64, resolution: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(MetricsError::InvalidArgument {
                reason: format!("sigma must be finite and non-negative, got {sigma}"),
            });
        }
        let d = gmm.dim();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for (i, mean) in gmm.means().iter().enumerate() {
            let cov = gmm.component_cov(i);
            for j in 0..d {
                let std = (cov[j * d + j] + sigma * sigma).sqrt();
                mins[j] = mins[j].min(mean[j] - GRID_STD_SPAN * std);
                maxs[j] = maxs[j].max(mean[j] + GRID_STD_SPAN * std);
            }
        }
        Self::new(mins, maxs, resolution)
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.mins
            .iter()
            .zip(&self.maxs)
            .map(|(lo, hi)| (hi - lo) / self.resolution as f64)
            .product()
    }

    /// Flat cell index of a point, or None if any coordinate is outside.
    fn cell_index(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for j in 0..self.dim() {
            let (lo, hi) = (self.mins[j], self.maxs[j]);
            if !(x[j] >= lo && x[j] <= hi) {
                return None;
            }
            let w = (hi - lo) / self.resolution as f64;
            let mut c = ((x[j] - lo) / w) as usize;
            if c >= self.resolution {
                c = self.resolution - 1;
            }
            idx = idx * self.resolution + c;
        }
        Some(idx)
    }

    /// Center coordinates of a flat cell index.
    fn cell_center(&self, mut idx: usize, out: &mut [f64]) {
        for j in (0..self.dim()).rev() {
            let c = idx % self.resolution;
            idx /= self.resolution;
            let w = (self.maxs[j] - self.mins[j]) / self.resolution as f64;
            out[j] = self.mins[j] + (c as f64 + 0.5) * w;
        }
    }

    /// Lower bound on the diffused mixture mass inside the bounds (union
    /// bound over per-dimension Gaussian tails). Errors below 99.9%.
    pub fn check_coverage(&self, gmm: &GaussianMixture, sigma: f64) -> Result<f64> {
        if gmm.dim() != self.dim() {
            return Err(MetricsError::DimMismatch { expected: self.dim(), got: gmm.dim() });
        }
        let d = self.dim();
        let mut escape = 0.0;
        for ((i, w), mean) in gmm.weights().iter().enumerate().zip(gmm.means()) {
            let cov = gmm.component_cov(i);
            for j in 0..d {
                let std = (cov[j * d + j] + sigma * sigma).sqrt();
                let z_lo = (mean[j] - self.mins[j]) / std;
                let z_hi = (self.maxs[j] - mean[j]) / std;
                escape += w * 0.5 * (erfc(z_lo / std::f64::consts::SQRT_2)
                    + erfc(z_hi / std::f64::consts::SQRT_2));
            }
        }
        let coverage = (1.0 - escape).max(0.0);
        if coverage < 0.999 {
            return Err(MetricsError::InvalidGrid {
                reason: format!("bounds cover only {coverage:.6} of the diffused mass"),
            });
        }
        Ok(coverage)
    }
}

/// Outcome of a histogram-vs-quadrature comparison.
#[derive(Debug, Clone, Copy)]
pub struct GridKlReport {
    /// KL( smoothed histogram || analytic cell masses ), in nats.
    pub kl: f64,
    /// Fraction of input samples falling outside the grid bounds.
    pub oob_fraction: f64,
    /// Samples actually histogrammed.
    pub n_used: usize,
    pub n_cells: usize,
}

/// KL divergence of the sample histogram from the analytic diffused density,
/// both restricted to the grid:
///
/// ```text
/// p_c = (n_c + 1) / (N + C)          (Laplace smoothing, 1 pseudo-count/cell)
/// q_c = p_t(center_c) dV / sum_c' p_t(center_c') dV
/// KL  = sum_c p_c ln(p_c / q_c)
/// ```
///
/// Out-of-bounds samples are excluded and reported, never an error. The
/// achievable floor for matched samples is the smoothing bias; compute it
/// with [`grid_kl_floor`] at the same sample size.
pub fn grid_kl_vs_analytic(
    samples: &[f64],
    gmm: &GaussianMixture,
    sigma: f64,
    grid: &GridSpec,
) -> Result<GridKlReport> {
    let d = grid.dim();
    if gmm.dim() != d {
        return Err(MetricsError::DimMismatch { expected: d, got: gmm.dim() });
    }
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    if samples.len() % d != 0 {
        return Err(MetricsError::RaggedSamples { len: samples.len(), dim: d });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite { what: "samples".into() });
    }
    let n_rows = samples.len() / d;
    let cells = grid.n_cells();

    let mut counts = vec![0usize; cells];
    let mut used = 0usize;
    for row in samples.chunks_exact(d) {
        if let Some(idx) = grid.cell_index(row) {
            counts[idx] += 1;
            used += 1;
        }
    }

    let diffused = gmm.diffused(sigma)?;
    let mut q = vec![0.0; cells];
    let mut center = vec![0.0; d];
    let mut q_total = 0.0;
    for (idx, qc) in q.iter_mut().enumerate() {
        grid.cell_center(idx, &mut center);
        *qc = diffused.density(&center);
        q_total += *qc;
    }
    if !(q_total.is_finite() && q_total > 0.0) {
        return Err(MetricsError::NonFinite { what: "analytic grid mass".into() });
    }

    let denom = (used + cells) as f64;
    let mut kl = 0.0;
    for (c, qc) in counts.iter().zip(&q) {
        let p = (*c as f64 + 1.0) / denom;
        let qn = (qc / q_total).max(f64::MIN_POSITIVE);
        kl += p * (p / qn).ln();
    }
    Ok(GridKlReport {
        kl: kl.max(0.0),
        oob_fraction: 1.0 - used as f64 / n_rows as f64,
        n_used: used,
        n_cells: cells,
    })
}

/// Draws `n` exact samples from the diffused mixture and returns the sample
/// buffer (row-major), for matched-size calibration floors.
pub fn exact_diffused_samples<R: Rng + ?Sized>(
    gmm: &GaussianMixture,
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(MetricsError::EmptySamples);
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(MetricsError::InvalidArgument {
            reason: format!("sigma must be finite and non-negative, got {sigma}"),
        });
    }
    let mut x = gmm.sample(n, rng);
    for v in x.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma * z;
    }
    Ok(x)
}

/// The smoothing floor at sample size `n`: the same divergence computed on
/// fresh exact draws from the reference itself.
pub fn grid_kl_floor<R: Rng + ?Sized>(
    gmm: &GaussianMixture,
    sigma: f64,
    grid: &GridSpec,
    n: usize,
    rng: &mut R,
) -> Result<GridKlReport> {
    let x = exact_diffused_samples(gmm, sigma, n, rng)?;
    grid_kl_vs_analytic(&x, gmm, sigma, grid)
}
