use tdm_diffusion::Solver;

use crate::error::{DistillError, Result};

/// Scaling rule for the correction term added to the current state when
/// building the revised target.
///
/// ```text
/// x~ = x + lambda * (s_real(x_tau, tau) - s_fake(x_tau, tau))
/// ```
///
/// With `Sigma2` the multiplier is `sigma_tau^2`, which cancels against the
/// score denominators so the correction reduces to the difference of the two
/// denoiser outputs.  `DmdNorm` additionally divides each sample's correction
/// by its mean absolute denoiser difference, giving a unit-scale update
/// direction; it is only meaningful for the squared loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaRule {
    Sigma2,
    DmdNorm,
}

impl LambdaRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            LambdaRule::Sigma2 => "sigma2",
            LambdaRule::DmdNorm => "dmd-norm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sigma2" => Ok(LambdaRule::Sigma2),
            "dmd-norm" => Ok(LambdaRule::DmdNorm),
            other => Err(DistillError::InvalidConfig {
                reason: format!("unknown lambda rule {other:?} (expected sigma2 or dmd-norm)"),
            }),
        }
    }
}

/// Penalty applied to the residual between the sampler state and the revised
/// target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorLoss {
    /// Mean over the batch of the squared residual norm.
    L2,
    /// Pseudo-Huber: `sqrt(||r||^2 + c^2) - c`, averaged over the batch.
    Huber,
}

impl GeneratorLoss {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratorLoss::L2 => "l2",
            GeneratorLoss::Huber => "huber",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(GeneratorLoss::L2),
            "huber" => Ok(GeneratorLoss::Huber),
            other => Err(DistillError::InvalidConfig {
                reason: format!("unknown generator loss {other:?} (expected l2 or huber)"),
            }),
        }
    }
}

/// Default pseudo-Huber constant, proportional to the square root of the data
/// dimension:
///
/// ```text
/// c = 0.00054 * sqrt(d)
/// ```
pub fn default_huber_c(dim: usize) -> f64 {
    0.00054 * (dim as f64).sqrt()
}

/// Hyper-parameters of the distillation loop.
#[derive(Debug, Clone)]
pub struct DistillConfig {
    /// Step counts the student is trained for.  A single entry trains a plain
    /// K-step sampler; several entries train one step-count-conditioned
    /// student over all of them, drawing K fresh every iteration.
    pub k_list: Vec<u32>,
    /// Residual penalty for the generator update.
    pub loss: GeneratorLoss,
    /// Scaling rule for the score-difference correction.
    pub lambda_rule: LambdaRule,
    /// Pseudo-Huber constant; `None` uses [`default_huber_c`].
    pub huber_c: Option<f64>,
    /// Whether the fake-score update reweights samples drawn around the
    /// trajectory state towards the clean-prediction proposal.
    pub importance_sampling: bool,
    /// Upper clip for the importance weights.
    pub importance_clip: f64,
    /// Fake-score updates per generator update.
    pub fake_updates_per_iter: u32,
    /// Match the clean predictions instead of the noisy trajectory states.
    pub clean_matching: bool,
    pub solver: Solver,
    pub batch: usize,
    pub lr_generator: f64,
    pub lr_fake: f64,
}

impl DistillConfig {
    /// Single-K defaults used by the standard runs.
    pub fn for_k(k: u32) -> Self {
        DistillConfig {
            k_list: vec![k],
            loss: GeneratorLoss::Huber,
            lambda_rule: LambdaRule::Sigma2,
            huber_c: None,
            importance_sampling: true,
            importance_clip: 10.0,
            fake_updates_per_iter: 1,
            clean_matching: false,
            solver: Solver::Euler,
            batch: 256,
            lr_generator: 1e-4,
            lr_fake: 1e-3,
        }
    }

    /// Whether the student and fake nets must be step-count conditioned.
    pub fn needs_k_conditioning(&self) -> bool {
        self.k_list.len() > 1
    }

    /// Resolved pseudo-Huber constant for data dimension `dim`.
    pub fn huber_c(&self, dim: usize) -> f64 {
        self.huber_c.unwrap_or_else(|| default_huber_c(dim))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(DistillError::InvalidConfig { reason });
        if self.k_list.is_empty() {
            return fail("k_list must not be empty".into());
        }
        if let Some(&k) = self.k_list.iter().find(|&&k| k == 0) {
            return fail(format!("k_list entries must be positive, got {k}"));
        }
        if self.lambda_rule == LambdaRule::DmdNorm && self.loss == GeneratorLoss::Huber {
            return fail("the dmd-norm rule only applies to the l2 loss".into());
        }
        if let Some(c) = self.huber_c {
            if !(c.is_finite() && c > 0.0) {
                return fail(format!("huber_c must be positive and finite, got {c}"));
            }
        }
        if !(self.importance_clip.is_finite() && self.importance_clip >= 1.0) {
            return fail(format!(
                "importance_clip must be >= 1, got {}",
                self.importance_clip
            ));
        }
        if self.fake_updates_per_iter == 0 {
            return fail("fake_updates_per_iter must be at least 1".into());
        }
        if self.batch == 0 {
            return fail("batch must be positive".into());
        }
        for (name, lr) in [("lr_generator", self.lr_generator), ("lr_fake", self.lr_fake)] {
            if !(lr.is_finite() && lr > 0.0) {
                return fail(format!("{name} must be positive and finite, got {lr}"));
            }
        }
        Ok(())
    }
}
