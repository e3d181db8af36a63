//! The JSON run configuration: one document per run, digest-stable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tdm_diffusion::{NetConfig, NoiseSchedule, Solver, TeacherOptions};
use tdm_distill::{DistillConfig, GeneratorLoss, LambdaRule};

use crate::error::{CliError, Result};
use crate::presets::preset;

fn default_t_max() -> f64 {
    10.0
}
fn default_sigma_family() -> String {
    "ve".into()
}
fn default_iters() -> u64 {
    5000
}
fn default_eval_every() -> u64 {
    500
}
fn default_eval_samples() -> usize {
    10_000
}
fn default_n_ablate_seeds() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSize {
    pub hidden_width: usize,
    pub hidden_layers: usize,
}

impl Default for NetSize {
    fn default() -> Self {
        Self { hidden_width: 64, hidden_layers: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherBudget {
    pub iters: usize,
    pub batch: usize,
    pub lr: f64,
    pub sigma_min: f64,
}

impl Default for TeacherBudget {
    fn default() -> Self {
        Self { iters: 20_000, batch: 256, lr: 1e-3, sigma_min: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSettings {
    pub k_list: Vec<u32>,
    /// "l2" or "huber".
    pub loss: String,
    /// "sigma2" or "dmd-norm".
    pub lambda_rule: String,
    /// None picks the dimension-scaled default.
    pub huber_c: Option<f64>,
    pub importance_sampling: bool,
    pub importance_clip: f64,
    pub fake_updates_per_iter: u32,
    pub clean_matching: bool,
    /// "euler" or "heun".
    pub solver: String,
    pub batch: usize,
    pub lr_generator: f64,
    pub lr_fake: f64,
}

impl Default for DistillSettings {
    fn default() -> Self {
        Self {
            k_list: vec![4],
            loss: "huber".into(),
            lambda_rule: "sigma2".into(),
            huber_c: None,
            importance_sampling: true,
            importance_clip: 10.0,
            fake_updates_per_iter: 1,
            clean_matching: false,
            solver: "euler".into(),
            batch: 256,
            lr_generator: 1e-4,
            lr_fake: 1e-3,
        }
    }
}

/// Everything one run needs, serializable to a single JSON document. Unknown
/// fields are rejected so typos surface as parse errors with a location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_sigma_family")]
    pub sigma_family: String,
    #[serde(default)]
    pub net: NetSize,
    #[serde(default)]
    pub teacher: TeacherBudget,
    #[serde(default)]
    pub distill: DistillSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_iters")]
    pub iters: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    /// Seed count for ablation suites (seeds seed..seed+n).
    #[serde(default = "default_n_ablate_seeds")]
    pub n_ablate_seeds: u64,
}

impl RunConfig {
    pub fn for_preset(name: impl Into<String>) -> Self {
        Self {
            preset: name.into(),
            t_max: default_t_max(),
            sigma_family: default_sigma_family(),
            net: NetSize::default(),
            teacher: TeacherBudget::default(),
            distill: DistillSettings::default(),
            seed: 0,
            iters: default_iters(),
            eval_every: default_eval_every(),
            eval_samples: default_eval_samples(),
            n_ablate_seeds: default_n_ablate_seeds(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::ConfigParse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::ConfigInvalid { reason: e.to_string() })?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        preset(&self.preset)?;
        if self.sigma_family != "ve" {
            return Err(CliError::ConfigInvalid {
                reason: format!("unsupported sigma_family '{}'; only 've'", self.sigma_family),
            });
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(CliError::ConfigInvalid {
                reason: format!("t_max must be positive, got {}", self.t_max),
            });
        }
        if self.iters == 0 || self.eval_every == 0 {
            return Err(CliError::ConfigInvalid {
                reason: "iters and eval_every must be positive".into(),
            });
        }
        if self.eval_samples < 1000 {
            return Err(CliError::ConfigInvalid {
                reason: format!("eval_samples must be at least 1000, got {}", self.eval_samples),
            });
        }
        if self.n_ablate_seeds == 0 {
            return Err(CliError::ConfigInvalid {
                reason: "n_ablate_seeds must be positive".into(),
            });
        }
        if self.net.hidden_width == 0 || self.net.hidden_layers == 0 {
            return Err(CliError::ConfigInvalid {
                reason: "net sizes must be positive".into(),
            });
        }
        if self.teacher.iters == 0 || self.teacher.batch == 0 {
            return Err(CliError::ConfigInvalid {
                reason: "teacher budget must be positive".into(),
            });
        }
        self.distill_config()?.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical (parsed and re-serialized) document, so
    /// formatting differences of the same content do not change identity.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn digest_short(&self) -> String {
        self.digest()[..12].to_string()
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        Ok(NoiseSchedule::new(self.t_max)?)
    }

    pub fn net_config(&self, k_cond: bool) -> Result<NetConfig> {
        let gmm = preset(&self.preset)?;
        Ok(NetConfig {
            data_dim: gmm.dim(),
            hidden_width: self.net.hidden_width,
            hidden_layers: self.net.hidden_layers,
            data_std: gmm.data_std(),
            k_cond,
        })
    }

    pub fn teacher_options(&self) -> TeacherOptions {
        TeacherOptions {
            iters: self.teacher.iters,
            batch: self.teacher.batch,
            lr: self.teacher.lr,
            sigma_min: self.teacher.sigma_min,
            log_every: 100,
        }
    }

    pub fn distill_config(&self) -> Result<DistillConfig> {
        let d = &self.distill;
        let loss = GeneratorLoss::parse(&d.loss)?;
        let lambda_rule = LambdaRule::parse(&d.lambda_rule)?;
        let solver = parse_solver(&d.solver)?;
        Ok(DistillConfig {
            k_list: d.k_list.clone(),
            loss,
            lambda_rule,
            huber_c: d.huber_c,
            importance_sampling: d.importance_sampling,
            importance_clip: d.importance_clip,
            fake_updates_per_iter: d.fake_updates_per_iter,
            clean_matching: d.clean_matching,
            solver,
            batch: d.batch,
            lr_generator: d.lr_generator,
            lr_fake: d.lr_fake,
        })
    }
}

pub fn parse_solver(name: &str) -> Result<Solver> {
    match name {
        "euler" => Ok(Solver::Euler),
        "heun" => Ok(Solver::Heun),
        _ => Err(CliError::ConfigInvalid {
            reason: format!("unknown solver '{name}'; use 'euler' or 'heun'"),
        }),
    }
}

pub fn solver_name(solver: Solver) -> &'static str {
    match solver {
        Solver::Euler => "euler",
        Solver::Heun => "heun",
    }
}

/// Training mode selected on the command line; each one overrides only the
/// settings it names, everything else comes from the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistillMode {
    TdmL2,
    TdmHuber,
    TdmUnify,
    CleanMatching,
    InstanceTraj,
}

pub const MODE_NAMES: [&str; 5] =
    ["tdm-l2", "tdm-huber", "tdm-unify", "clean-matching", "instance-traj"];

impl DistillMode {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tdm-l2" => Ok(Self::TdmL2),
            "tdm-huber" => Ok(Self::TdmHuber),
            "tdm-unify" => Ok(Self::TdmUnify),
            "clean-matching" => Ok(Self::CleanMatching),
            "instance-traj" => Ok(Self::InstanceTraj),
            _ => Err(CliError::ConfigInvalid {
                reason: format!("unknown mode '{name}'; available: {}", MODE_NAMES.join(", ")),
            }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TdmL2 => "tdm-l2",
            Self::TdmHuber => "tdm-huber",
            Self::TdmUnify => "tdm-unify",
            Self::CleanMatching => "clean-matching",
            Self::InstanceTraj => "instance-traj",
        }
    }

    /// Settings implied by the mode, applied over the config's distillation
    /// block.
    pub fn apply(self, base: &DistillConfig) -> DistillConfig {
        let mut cfg = base.clone();
        match self {
            Self::TdmL2 => {
                cfg.loss = GeneratorLoss::L2;
                cfg.clean_matching = false;
            }
            Self::TdmHuber => {
                cfg.loss = GeneratorLoss::Huber;
                cfg.clean_matching = false;
            }
            Self::TdmUnify => {
                cfg.loss = GeneratorLoss::Huber;
                cfg.clean_matching = false;
                cfg.k_list = vec![1, 2, 4];
            }
            Self::CleanMatching => {
                cfg.loss = GeneratorLoss::Huber;
                cfg.clean_matching = true;
            }
            Self::InstanceTraj => {}
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Importance,
    Unify,
    CleanVsNoisy,
    SolverCross,
    SharedFake,
}

pub const SUITE_NAMES: [&str; 5] =
    ["importance", "unify", "clean-vs-noisy", "solver-cross", "shared-fake"];

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "importance" => Ok(Self::Importance),
            "unify" => Ok(Self::Unify),
            "clean-vs-noisy" => Ok(Self::CleanVsNoisy),
            "solver-cross" => Ok(Self::SolverCross),
            "shared-fake" => Ok(Self::SharedFake),
            _ => Err(CliError::ConfigInvalid {
                reason: format!("unknown suite '{name}'; available: {}", SUITE_NAMES.join(", ")),
            }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Importance => "importance",
            Self::Unify => "unify",
            Self::CleanVsNoisy => "clean-vs-noisy",
            Self::SolverCross => "solver-cross",
            Self::SharedFake => "shared-fake",
        }
    }
}
