//! AdamW with global-norm gradient clipping.
//!
//! Defaults follow the training recipe used throughout this workspace:
//! `beta1 = 0` (no momentum, so update direction is the clipped gradient
//! rescaled per-coordinate), `beta2 = 0.999`, clip norm 1.0, decoupled weight
//! decay 0.

use std::sync::Arc;

use crate::error::{AutodiffError, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global L2 norm threshold; `f64::INFINITY` disables clipping.
    pub clip_norm: f64,
}

impl AdamWConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.clip_norm > 0.0;
        if ok {
            Ok(())
        } else {
            Err(AutodiffError::NonFinite { op: "adamw_config" })
        }
    }
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.0,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: 1.0,
        }
    }
}

/// Result of one optimizer step. Steps with any non-finite gradient are
/// skipped outright: state and step counter stay untouched.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub applied: bool,
    /// Global gradient norm before clipping (NaN when skipped).
    pub grad_norm: f64,
    pub clipped: bool,
}

pub struct AdamW {
    cfg: AdamWConfig,
    steps: u64,
    skipped: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            steps: 0,
            skipped: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.cfg
    }

    /// Swap in a new learning rate (for decay schedules); moment buffers and
    /// every other setting are untouched.
    pub fn set_lr(&mut self, lr: f64) -> Result<()> {
        let cfg = AdamWConfig { lr, ..self.cfg };
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn steps_applied(&self) -> u64 {
        self.steps
    }

    pub fn steps_skipped(&self) -> u64 {
        self.skipped
    }

    /// Apply one update in-place. `params` and `grads` must align one-to-one
    /// (same order every call; moment buffers are keyed by position).
    pub fn step(
        &mut self,
        mut params: Vec<&mut Arc<Vec<f64>>>,
        grads: &[Vec<f64>],
    ) -> Result<StepOutcome> {
        if params.len() != grads.len() {
            return Err(AutodiffError::ParamGradMismatch {
                params: params.len(),
                grads: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(AutodiffError::ParamGradMismatch {
                    params: p.len(),
                    grads: g.len(),
                });
            }
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }

        let mut sq_sum = 0.0;
        let mut finite = true;
        for g in grads {
            for &v in g {
                if !v.is_finite() {
                    finite = false;
                }
                sq_sum += v * v;
            }
        }
        if !finite || !sq_sum.is_finite() {
            self.skipped += 1;
            log::warn!("adamw: non-finite gradient, skipping step (total skipped: {})", self.skipped);
            return Ok(StepOutcome {
                applied: false,
                grad_norm: f64::NAN,
                clipped: false,
            });
        }

        let norm = sq_sum.sqrt();
        let clipped = norm > self.cfg.clip_norm;
        let scale = if clipped { self.cfg.clip_norm / norm } else { 1.0 };

        self.steps += 1;
        let t = self.steps as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        let lr = self.cfg.lr;
        let (b1, b2, eps, wd) = (self.cfg.beta1, self.cfg.beta2, self.cfg.eps, self.cfg.weight_decay);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pv = Arc::make_mut(*p);
            for i in 0..g.len() {
                let gi = g[i] * scale;
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                pv[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * pv[i]);
            }
        }

        Ok(StepOutcome {
            applied: true,
            grad_norm: norm,
            clipped,
        })
    }
}
