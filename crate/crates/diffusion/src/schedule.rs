//! Variance-exploding noise schedule sigma(t) = t on [0, t_max].
//!
//! The terminal time doubles as the terminal noise level; choose it at least
//! 5x the data standard deviation so the terminal marginal is effectively the
//! prior N(0, sigma(t_max)^2 I).

use crate::error::{DiffusionError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    t_max: f64,
}

impl NoiseSchedule {
    pub fn new(t_max: f64) -> Result<Self> {
        if !t_max.is_finite() || t_max <= 0.0 {
            return Err(DiffusionError::TimeOutOfRange { t: t_max, t_max });
        }
        Ok(Self { t_max })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// sigma(t) = t, with range validation.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(t)
    }

    pub fn max_sigma(&self) -> f64 {
        self.t_max
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 || t > self.t_max {
            return Err(DiffusionError::TimeOutOfRange {
                t,
                t_max: self.t_max,
            });
        }
        Ok(())
    }

    /// True when the terminal noise level dominates the data scale (>= 5x).
    pub fn covers_data_std(&self, data_std: f64) -> bool {
        self.max_sigma() >= 5.0 * data_std
    }
}

/// Forward noising x_t = x_0 + sigma(t)·noise with caller-supplied standard
/// normal noise (explicit for testability).
pub fn diffuse(sched: &NoiseSchedule, x0: &[f64], t: f64, noise: &[f64]) -> Result<Vec<f64>> {
    let sigma = sched.sigma(t)?;
    if noise.len() != x0.len() {
        return Err(DiffusionError::NoiseLength {
            expected: x0.len(),
            got: noise.len(),
        });
    }
    Ok(x0
        .iter()
        .zip(noise)
        .map(|(&x, &e)| x + sigma * e)
        .collect())
}
