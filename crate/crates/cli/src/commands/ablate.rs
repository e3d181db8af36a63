//! `tdm ablate`: predefined comparison suites run over a shared seed list
//! and iteration budget, emitting one table row per (arm, seed, metric).

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tdm_diffusion::{
    sample_final, DenoiserNet, GaussianMixture, NetDenoiser, NoiseSchedule, SigmaQuery, Solver,
    Tensor,
};
use tdm_distill::{
    shared_fake_optimum, train_shared_fake, DistillConfig, Distiller, SharedFakeOptions,
};
use tdm_metrics::{
    exact_diffused_samples, grid_kl_vs_analytic, mode_coverage, sliced_wasserstein, GridSpec,
    DEFAULT_GRID_RESOLUTION, DEFAULT_MODE_RADIUS_STD,
};

use crate::commands::distill::cosine_factor;
use crate::commands::{check_dim, load_checkpoint, require_teacher, schedule_for};
use crate::config::{solver_name, RunConfig, Suite};
use crate::error::{CliError, Result};
use crate::presets::preset;
use crate::rundir::{allocate, run_stem};
use crate::runlog::{fmt_value, Manifest};

const DIVERGENCE_PATIENCE: u32 = 50;
const EVAL_PROJECTIONS: usize = 128;

pub const TABLE_CSV: &str = "table.csv";
pub const TABLE_JSON: &str = "table.json";

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub arm: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug)]
pub struct AblateOutcome {
    pub dir: PathBuf,
    pub rows: Vec<TableRow>,
}

impl AblateOutcome {
    /// Value of one (arm, seed, metric) cell.
    pub fn cell(&self, arm: &str, seed: u64, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.arm == arm && r.seed == seed && r.metric == metric)
            .map(|r| r.value)
    }
}

/// Trains one arm without logging; a diverged arm falls back to its last
/// good parameters.
fn train_quiet(
    teacher: &DenoiserNet,
    sched: NoiseSchedule,
    dcfg: DistillConfig,
    seed: u64,
    iters: u64,
) -> Result<DenoiserNet> {
    let mut engine = Distiller::new(teacher.clone(), sched, dcfg, seed)?;
    let mut last_good: Option<DenoiserNet> = None;
    let mut bad_streak = 0u32;
    for iter in 0..iters {
        engine.set_lr_factor(cosine_factor(iter, iters))?;
        let m = engine.step()?;
        if m.applied_gen {
            bad_streak = 0;
            last_good = Some(engine.student().clone());
        } else {
            bad_streak += 1;
            if bad_streak >= DIVERGENCE_PATIENCE {
                break;
            }
        }
    }
    Ok(last_good.unwrap_or_else(|| engine.student().clone()))
}

struct ArmEval {
    sw2: f64,
    grid_kl: f64,
    covered: usize,
}

/// Shared-direction evaluation: the rng seed depends on the run seed and the
/// step count but not on the arm, so paired arms face identical projections
/// and reference draws.
fn eval_arm(
    net: &DenoiserNet,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    steps: u32,
    solver: Solver,
    n: usize,
    seed: u64,
) -> Result<ArmEval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(steps) << 32));
    let k_arg = if net.config().k_cond { Some(steps) } else { None };
    let den = NetDenoiser { net, k: k_arg };
    let finals = sample_final(&den, sched, steps, n, solver, &mut rng)?;
    let exact = exact_diffused_samples(gmm, 0.0, n, &mut rng)?;
    let sw2 = sliced_wasserstein(&finals, &exact, gmm.dim(), EVAL_PROJECTIONS, &mut rng)?;
    let grid = GridSpec::for_diffused(gmm, 0.0, DEFAULT_GRID_RESOLUTION)?;
    let grid_kl = grid_kl_vs_analytic(&finals, gmm, 0.0, &grid)?.kl;
    let covered = mode_coverage(&finals, gmm, DEFAULT_MODE_RADIUS_STD)?.covered_count();
    Ok(ArmEval { sw2, grid_kl, covered })
}

fn seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.n_ablate_seeds).map(|i| cfg.seed + i).collect()
}

/// Distillation suites: pairs of arms differing in exactly one setting.
fn distill_suite_rows(
    cfg: &RunConfig,
    suite: Suite,
    teacher: &DenoiserNet,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
) -> Result<Vec<TableRow>> {
    let base = cfg.distill_config()?;
    let arms: Vec<(String, DistillConfig, Vec<u32>)> = match suite {
        Suite::Importance => {
            let k_eval = vec![*base.k_list.iter().max().expect("non-empty")];
            let mut on = base.clone();
            on.importance_sampling = true;
            let mut off = base.clone();
            off.importance_sampling = false;
            vec![("is-on".into(), on, k_eval.clone()), ("is-off".into(), off, k_eval)]
        }
        Suite::Unify => {
            let k_max = *base.k_list.iter().max().expect("non-empty");
            let mut unified = base.clone();
            unified.k_list = vec![1, 2, k_max];
            unified.k_list.dedup();
            let mut single = base.clone();
            single.k_list = vec![k_max];
            let evals = unified.k_list.clone();
            vec![("unify".into(), unified, evals.clone()), ("single-k".into(), single, evals)]
        }
        Suite::CleanVsNoisy => {
            let k_eval = vec![*base.k_list.iter().max().expect("non-empty")];
            let mut noisy = base.clone();
            noisy.clean_matching = false;
            let mut clean = base.clone();
            clean.clean_matching = true;
            vec![("noisy".into(), noisy, k_eval.clone()), ("clean".into(), clean, k_eval)]
        }
        Suite::SolverCross => {
            let k_eval = vec![*base.k_list.iter().max().expect("non-empty")];
            let mut euler = base.clone();
            euler.solver = Solver::Euler;
            let mut heun = base.clone();
            heun.solver = Solver::Heun;
            vec![
                ("train-euler".into(), euler, k_eval.clone()),
                ("train-heun".into(), heun, k_eval),
            ]
        }
        Suite::SharedFake => unreachable!("handled separately"),
    };

    let mut rows = Vec::new();
    for (arm, dcfg, eval_ks) in &arms {
        dcfg.validate()?;
        for &seed in &seeds(cfg) {
            let student = train_quiet(teacher, *sched, dcfg.clone(), seed, cfg.iters)?;
            match suite {
                Suite::SolverCross => {
                    for eval_solver in [Solver::Euler, Solver::Heun] {
                        let ev = eval_arm(
                            &student,
                            gmm,
                            sched,
                            eval_ks[0],
                            eval_solver,
                            cfg.eval_samples,
                            seed,
                        )?;
                        let tag = solver_name(eval_solver);
                        rows.push(TableRow {
                            arm: arm.clone(),
                            seed,
                            metric: format!("sw2_eval_{tag}"),
                            value: ev.sw2,
                        });
                        rows.push(TableRow {
                            arm: arm.clone(),
                            seed,
                            metric: format!("grid_kl_eval_{tag}"),
                            value: ev.grid_kl,
                        });
                    }
                }
                _ => {
                    for &steps in eval_ks {
                        let ev = eval_arm(
                            &student,
                            gmm,
                            sched,
                            steps,
                            dcfg.solver,
                            cfg.eval_samples,
                            seed,
                        )?;
                        rows.push(TableRow {
                            arm: arm.clone(),
                            seed,
                            metric: format!("grid_kl_s{steps}"),
                            value: ev.grid_kl,
                        });
                        rows.push(TableRow {
                            arm: arm.clone(),
                            seed,
                            metric: format!("sw2_s{steps}"),
                            value: ev.sw2,
                        });
                        rows.push(TableRow {
                            arm: arm.clone(),
                            seed,
                            metric: format!("modes_s{steps}"),
                            value: ev.covered as f64,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Shared-fake stress: two well-separated 1-D branches feed one fake model;
/// the trained score should track the blended optimum and neither branch.
fn shared_fake_rows(cfg: &RunConfig) -> Result<Vec<TableRow>> {
    let branch1 = GaussianMixture::isotropic(&[vec![-2.0]], 0.04)?;
    let branch2 = GaussianMixture::isotropic(&[vec![2.0]], 0.04)?;
    let mut rows = Vec::new();
    for &sigma_tau in &[0.3, 0.5, 1.0] {
        let arm = format!("sigma-{sigma_tau}");
        for &seed in &seeds(cfg) {
            let opts = SharedFakeOptions {
                hidden_width: cfg.net.hidden_width,
                hidden_layers: cfg.net.hidden_layers,
                iters: cfg.iters as usize,
                batch: cfg.distill.batch,
                lr: cfg.distill.lr_fake,
                sigma_tau,
                log_every: usize::MAX,
            };
            let run = train_shared_fake(&branch1, &branch2, &opts, seed)?;
            let p1 = branch1.diffused(sigma_tau)?;
            let p2 = branch2.diffused(sigma_tau)?;
            // Density-weighted relative L2 over a grid spanning both branches.
            let xs: Vec<f64> = (0..141).map(|i| -3.5 + 0.05 * i as f64).collect();
            let net_out = run
                .net
                .forward(&Tensor::matrix(xs.len(), 1, xs.clone())?, SigmaQuery::Shared(sigma_tau), None)?;
            let s2 = sigma_tau * sigma_tau;
            let mut num_blend = 0.0;
            let mut num_b1 = 0.0;
            let mut num_b2 = 0.0;
            let mut den = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let w = 0.5 * (p1.density(&[x]) + p2.density(&[x]));
                let s_net = (net_out.data()[i] - x) / s2;
                let s_blend = shared_fake_optimum(&p1, &p2, &[x])?[0];
                let s_b1 = p1.score(&[x])[0];
                let s_b2 = p2.score(&[x])[0];
                num_blend += w * (s_net - s_blend).powi(2);
                num_b1 += w * (s_net - s_b1).powi(2);
                num_b2 += w * (s_net - s_b2).powi(2);
                den += w * s_blend.powi(2);
            }
            let den = den.max(f64::MIN_POSITIVE);
            rows.push(TableRow {
                arm: arm.clone(),
                seed,
                metric: "rel_l2_blend".into(),
                value: (num_blend / den).sqrt(),
            });
            rows.push(TableRow {
                arm: arm.clone(),
                seed,
                metric: "rel_l2_branch1".into(),
                value: (num_b1 / den).sqrt(),
            });
            rows.push(TableRow {
                arm: arm.clone(),
                seed,
                metric: "rel_l2_branch2".into(),
                value: (num_b2 / den).sqrt(),
            });
        }
    }
    Ok(rows)
}

fn write_table(dir: &Path, rows: &[TableRow]) -> Result<()> {
    let mut csv = String::from("arm,seed,metric,value\n");
    for r in rows {
        csv.push_str(&format!("{},{},{},{}\n", r.arm, r.seed, r.metric, fmt_value(r.value)));
    }
    let csv_path = dir.join(TABLE_CSV);
    std::fs::write(&csv_path, csv).map_err(|e| CliError::io(&csv_path, e))?;
    let json = serde_json::to_string_pretty(rows)
        .map_err(|e| CliError::RunLog { reason: format!("table serialization: {e}") })?;
    let json_path = dir.join(TABLE_JSON);
    std::fs::write(&json_path, json + "\n").map_err(|e| CliError::io(&json_path, e))?;
    Ok(())
}

pub fn cmd_ablate(
    cfg: &RunConfig,
    suite: Suite,
    teacher_path: Option<&Path>,
    out_root: &Path,
) -> Result<AblateOutcome> {
    cfg.validate()?;
    let dir = allocate(
        out_root,
        &run_stem("ablate", Some(suite.as_str()), &cfg.digest_short(), cfg.seed),
    )?;
    Manifest::new("ablate", Some(suite.as_str()), cfg).write(&dir)?;

    let rows = if suite == Suite::SharedFake {
        shared_fake_rows(cfg)?
    } else {
        let path = teacher_path.ok_or_else(|| CliError::ConfigInvalid {
            reason: format!("suite '{}' needs --teacher", suite.as_str()),
        })?;
        let gmm = preset(&cfg.preset)?;
        let sched = schedule_for(cfg)?;
        let ckpt = load_checkpoint(path, cfg)?;
        require_teacher(&ckpt.net, path)?;
        check_dim(&ckpt.net, gmm.dim())?;
        distill_suite_rows(cfg, suite, &ckpt.net, &gmm, &sched)?
    };

    write_table(&dir, &rows)?;
    Ok(AblateOutcome { dir, rows })
}
