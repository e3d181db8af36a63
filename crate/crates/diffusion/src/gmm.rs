//! Gaussian mixtures with analytically known diffused marginals.
//!
//! Under the variance-exploding forward process, diffusing a mixture
//! component N(mu, C) to noise level sigma yields N(mu, C + sigma^2 I), so
//! density, score, and posterior-mean denoiser stay in closed form at every
//! noise level. These exact quantities are the reference against which all
//! trained networks are judged.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DiffusionError, Result};

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)

/// Lower-triangular Cholesky factor of a d x d SPD matrix (row-major).
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(sum.is_finite() && sum > 0.0) {
                    return None;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solve (L Lᵀ) x = b given the Cholesky factor L.
fn chol_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * d + j] * y[j];
        }
        y[i] = s / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for j in i + 1..d {
            s -= l[j * d + i] * x[j];
        }
        x[i] = s / l[i * d + i];
    }
    x
}

fn chol_logdet(l: &[f64], d: usize) -> f64 {
    (0..d).map(|i| l[i * d + i].ln()).sum::<f64>() * 2.0
}

#[derive(Debug, Clone)]
struct Component {
    weight: f64,
    log_weight: f64,
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    comps: Vec<Component>,
}

impl GaussianMixture {
    /// Build a mixture from weights, means, and row-major covariances.
    /// Weights are normalized; covariances must be symmetric positive
    /// definite.
    pub fn new(weights: &[f64], means: &[Vec<f64>], covs: &[Vec<f64>]) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covs.len() {
            return Err(DiffusionError::InvalidMixture {
                reason: format!(
                    "component counts disagree: {} weights, {} means, {} covariances",
                    weights.len(),
                    means.len(),
                    covs.len()
                ),
            });
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(DiffusionError::InvalidMixture {
                reason: "dimension must be >= 1".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 || weights.iter().any(|&w| !w.is_finite() || w <= 0.0)
        {
            return Err(DiffusionError::InvalidMixture {
                reason: "weights must be positive and finite".into(),
            });
        }
        let mut comps = Vec::with_capacity(weights.len());
        for (idx, ((&w, mean), cov)) in weights.iter().zip(means).zip(covs).enumerate() {
            if mean.len() != dim {
                return Err(DiffusionError::InvalidMixture {
                    reason: format!("mean {idx} has dimension {}, expected {dim}", mean.len()),
                });
            }
            if cov.len() != dim * dim {
                return Err(DiffusionError::InvalidMixture {
                    reason: format!("covariance {idx} has {} entries, expected {}", cov.len(), dim * dim),
                });
            }
            for i in 0..dim {
                for j in 0..i {
                    let (a, b) = (cov[i * dim + j], cov[j * dim + i]);
                    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                        return Err(DiffusionError::DegenerateCovariance { component: idx });
                    }
                }
            }
            let chol = cholesky(cov, dim)
                .ok_or(DiffusionError::DegenerateCovariance { component: idx })?;
            let weight = w / total;
            comps.push(Component {
                weight,
                log_weight: weight.ln(),
                mean: mean.clone(),
                cov: cov.clone(),
                chol,
            });
        }
        Ok(Self { dim, comps })
    }

    /// Equal-weight mixture of isotropic components with shared variance.
    pub fn isotropic(means: &[Vec<f64>], var: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(DiffusionError::InvalidMixture {
                reason: "at least one component required".into(),
            });
        }
        let dim = means[0].len();
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = var;
        }
        let weights = vec![1.0; means.len()];
        let covs = vec![cov; means.len()];
        Self::new(&weights, means, &covs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c.weight).collect()
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.comps.iter().map(|c| c.mean.clone()).collect()
    }

    pub fn component_cov(&self, i: usize) -> &[f64] {
        &self.comps[i].cov
    }

    /// Mixture mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.comps {
            for (mi, &ci) in m.iter_mut().zip(&c.mean) {
                *mi += c.weight * ci;
            }
        }
        m
    }

    /// Full mixture covariance: sum_i w_i (C_i + mu_i mu_iᵀ) − mu muᵀ.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mu = self.mean();
        let mut cov = vec![0.0; d * d];
        for c in &self.comps {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += c.weight * (c.cov[i * d + j] + c.mean[i] * c.mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] -= mu[i] * mu[j];
            }
        }
        cov
    }

    /// Per-coordinate standard deviation averaged over dimensions:
    /// sqrt(tr(Cov)/d). This is the scale fed to network preconditioning and
    /// used to size evaluation grids.
    pub fn data_std(&self) -> f64 {
        let d = self.dim;
        let cov = self.covariance();
        let tr: f64 = (0..d).map(|i| cov[i * d + i]).sum();
        (tr / d as f64).sqrt()
    }

    /// Per-component largest marginal std (sqrt of max diagonal entry); used
    /// for mode-coverage radii.
    pub fn component_max_std(&self, i: usize) -> f64 {
        let d = self.dim;
        let c = &self.comps[i];
        (0..d)
            .map(|j| c.cov[j * d + j])
            .fold(f64::MIN, f64::max)
            .sqrt()
    }

    /// Draw n samples (row-major n x d).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; n * d];
        let mut z = vec![0.0; d];
        for row in out.chunks_exact_mut(d) {
            let mut u: f64 = rng.random();
            let mut comp = &self.comps[self.comps.len() - 1];
            for c in &self.comps {
                if u < c.weight {
                    comp = c;
                    break;
                }
                u -= c.weight;
            }
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            for i in 0..d {
                let mut v = comp.mean[i];
                for j in 0..=i {
                    v += comp.chol[i * d + j] * z[j];
                }
                row[i] = v;
            }
        }
        out
    }

    /// Closed-form diffused mixture at noise level sigma >= 0: each component
    /// becomes N(mu, C + sigma^2 I).
    pub fn diffused(&self, sigma: f64) -> Result<DiffusedMixture> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(DiffusionError::NonPositiveSigma { sigma });
        }
        let d = self.dim;
        let s2 = sigma * sigma;
        let mut comps = Vec::with_capacity(self.comps.len());
        for (idx, c) in self.comps.iter().enumerate() {
            let mut cov = c.cov.clone();
            for i in 0..d {
                cov[i * d + i] += s2;
            }
            let chol = cholesky(&cov, d)
                .ok_or(DiffusionError::DegenerateCovariance { component: idx })?;
            let logdet = chol_logdet(&chol, d);
            comps.push(DiffComp {
                log_weight: c.log_weight,
                mean: c.mean.clone(),
                chol,
                logdet,
            });
        }
        Ok(DiffusedMixture {
            dim: d,
            sigma,
            comps,
        })
    }
}

#[derive(Debug, Clone)]
struct DiffComp {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Vec<f64>,
    logdet: f64,
}

/// The mixture at a fixed noise level, with per-component factorizations
/// precomputed for repeated density/score queries.
#[derive(Debug, Clone)]
pub struct DiffusedMixture {
    dim: usize,
    sigma: f64,
    comps: Vec<DiffComp>,
}

impl DiffusedMixture {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Per-component log w_i + log N_i(x) terms.
    fn log_terms(&self, x: &[f64], diff: &mut Vec<f64>) -> Vec<(f64, Vec<f64>)> {
        let d = self.dim;
        self.comps
            .iter()
            .map(|c| {
                diff.clear();
                diff.extend(x.iter().zip(&c.mean).map(|(&xi, &mi)| xi - mi));
                let sol = chol_solve(&c.chol, d, diff);
                let quad: f64 = diff.iter().zip(&sol).map(|(&a, &b)| a * b).sum();
                let log_pdf = -0.5 * (d as f64 * LN_2PI + c.logdet + quad);
                // sol = (C+s^2 I)^{-1}(x-mu); per-component score is -sol
                (c.log_weight + log_pdf, sol)
            })
            .collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut scratch = Vec::with_capacity(self.dim);
        let terms = self.log_terms(x, &mut scratch);
        let m = terms.iter().map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let s: f64 = terms.iter().map(|(l, _)| (l - m).exp()).sum();
        m + s.ln()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Exact score of the diffused marginal:
    /// sum_i r_i(x) · C_i'^{-1}(mu_i − x) with responsibilities r_i computed
    /// in log space.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = Vec::with_capacity(self.dim);
        let terms = self.log_terms(x, &mut scratch);
        let m = terms.iter().map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut out = vec![0.0; self.dim];
        for (l, sol) in &terms {
            let r = (l - m).exp();
            total += r;
            for (o, &s) in out.iter_mut().zip(sol) {
                *o -= r * s;
            }
        }
        for o in out.iter_mut() {
            *o /= total;
        }
        out
    }

    /// Posterior-mean denoiser via Tweedie's identity:
    /// E[x_0 | x_t] = x_t + sigma^2 · score(x_t).
    pub fn denoise(&self, x: &[f64]) -> Vec<f64> {
        let s2 = self.sigma * self.sigma;
        let sc = self.score(x);
        x.iter().zip(&sc).map(|(&xi, &si)| xi + s2 * si).collect()
    }

    pub fn score_batch(&self, xs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(xs.len());
        for row in xs.chunks_exact(d) {
            out.extend(self.score(row));
        }
        out
    }

    pub fn log_density_batch(&self, xs: &[f64]) -> Vec<f64> {
        xs.chunks_exact(self.dim)
            .map(|row| self.log_density(row))
            .collect()
    }

    pub fn denoise_batch(&self, xs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(xs.len());
        for row in xs.chunks_exact(d) {
            out.extend(self.denoise(row));
        }
        out
    }
}

/// Exact score of the data mixture diffused to time t.
pub fn analytic_score(
    gmm: &GaussianMixture,
    sched: &crate::schedule::NoiseSchedule,
    xs: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let sigma = sched.sigma(t)?;
    Ok(gmm.diffused(sigma)?.score_batch(xs))
}

/// Exact posterior-mean denoiser of the data mixture at time t.
pub fn analytic_denoiser(
    gmm: &GaussianMixture,
    sched: &crate::schedule::NoiseSchedule,
    xs: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let sigma = sched.sigma(t)?;
    Ok(gmm.diffused(sigma)?.denoise_batch(xs))
}
