//! `tdm distill`: train a few-step student from a teacher checkpoint,
//! logging every iteration and keeping the last good checkpoint if the run
//! diverges.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdm_diffusion::{
    checkpoint, sample_final, DenoiserNet, GaussianMixture, NetDenoiser, NoiseSchedule, Solver,
};
use tdm_distill::{Distiller, InstanceTrajConfig, InstanceTrajDistiller};
use tdm_metrics::{exact_diffused_samples, sliced_wasserstein, MetricReport};

use crate::commands::eval::{evaluate_net, write_boundary_dumps};
use crate::commands::{
    check_dim, load_checkpoint, require_teacher, schedule_for, FAKE_CKPT, LAST_GOOD_CKPT,
    REPORT_NAME, STUDENT_CKPT,
};
use crate::config::{DistillMode, RunConfig};
use crate::error::{CliError, Result};
use crate::presets::preset;
use crate::rundir::{allocate, run_stem};
use crate::runlog::{Manifest, RunLog, DISTILL_COLUMNS, METRICS_LOG_NAME, RUNLOG_NAME};

/// Consecutive skipped generator updates tolerated before the run aborts.
const DIVERGENCE_PATIENCE: u32 = 50;
const QUICK_EVAL_BATCH: usize = 2048;
const QUICK_EVAL_PROJECTIONS: usize = 64;

pub const METRICS_COLUMNS: [&str; 2] = ["iter", "sw2_final"];

/// Cosine learning-rate decay from 1 to ~0 over the run.
pub fn cosine_factor(iter: u64, total: u64) -> f64 {
    let progress = iter as f64 / total.max(1) as f64;
    0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Debug)]
pub struct DistillOutcome {
    pub dir: PathBuf,
    pub iters_run: u64,
    pub diverged: bool,
    /// Final-sample metrics; absent when the run aborted.
    pub report: Option<MetricReport>,
}

/// Cheap training-time probe: sliced W2 between a modest batch of final
/// samples and exact draws from the data distribution.
fn quick_sw2(
    net: &DenoiserNet,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    k: u32,
    solver: Solver,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k_arg = if net.config().k_cond { Some(k) } else { None };
    let den = NetDenoiser { net, k: k_arg };
    let finals = sample_final(&den, sched, k, QUICK_EVAL_BATCH, solver, &mut rng)?;
    let exact = exact_diffused_samples(gmm, 0.0, QUICK_EVAL_BATCH, &mut rng)?;
    Ok(sliced_wasserstein(&finals, &exact, gmm.dim(), QUICK_EVAL_PROJECTIONS, &mut rng)?)
}

struct LoopOutput {
    student: DenoiserNet,
    fake: Option<DenoiserNet>,
    iters_run: u64,
    diverged: bool,
}

fn run_engine_loop(
    cfg: &RunConfig,
    mut engine: Distiller,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    log: &mut RunLog,
    metrics_log: &mut RunLog,
    dir: &Path,
) -> Result<LoopOutput> {
    let k_eval = *engine.config().k_list.iter().max().expect("validated non-empty");
    let solver = engine.config().solver;
    let mut last_good: Option<DenoiserNet> = None;
    let mut bad_streak = 0u32;
    let mut iters_run = 0;
    let mut diverged = false;
    for iter in 0..cfg.iters {
        engine.set_lr_factor(cosine_factor(iter, cfg.iters))?;
        let m = engine.step()?;
        iters_run = m.iteration;
        log.append(
            m.iteration,
            &[
                m.loss_gen,
                m.loss_fake,
                m.weight_mean,
                m.weight_max,
                m.grad_norm_gen,
                m.grad_norm_fake,
                f64::from(m.k),
                m.m as f64,
                m.tau,
            ],
        )?;
        if m.applied_gen {
            bad_streak = 0;
            last_good = Some(engine.student().clone());
        } else {
            bad_streak += 1;
            if bad_streak >= DIVERGENCE_PATIENCE {
                diverged = true;
                break;
            }
        }
        if iters_run % cfg.eval_every == 0 {
            let sw = quick_sw2(engine.student(), gmm, sched, k_eval, solver, cfg.seed ^ iters_run)?;
            metrics_log.append(iters_run, &[sw])?;
        }
    }
    if diverged {
        if let Some(net) = &last_good {
            checkpoint::save(net, sched.t_max(), &engine.config().k_list, &dir.join(LAST_GOOD_CKPT))?;
        }
        return Ok(LoopOutput {
            student: engine.student().clone(),
            fake: Some(engine.fake().clone()),
            iters_run,
            diverged: true,
        });
    }
    Ok(LoopOutput {
        student: engine.student().clone(),
        fake: Some(engine.fake().clone()),
        iters_run,
        diverged: false,
    })
}

fn run_instance_loop(
    cfg: &RunConfig,
    mut engine: InstanceTrajDistiller,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    k: u32,
    solver: Solver,
    log: &mut RunLog,
    metrics_log: &mut RunLog,
    dir: &Path,
) -> Result<LoopOutput> {
    let mut last_good: Option<DenoiserNet> = None;
    let mut bad_streak = 0u32;
    let mut iters_run = 0;
    let mut diverged = false;
    for iter in 0..cfg.iters {
        engine.set_lr_factor(cosine_factor(iter, cfg.iters))?;
        let m = engine.step()?;
        iters_run = m.iteration;
        log.append(
            m.iteration,
            &[
                m.loss,
                f64::NAN,
                f64::NAN,
                f64::NAN,
                m.grad_norm,
                f64::NAN,
                f64::from(k),
                m.m as f64,
                f64::NAN,
            ],
        )?;
        if m.applied {
            bad_streak = 0;
            last_good = Some(engine.student().clone());
        } else {
            bad_streak += 1;
            if bad_streak >= DIVERGENCE_PATIENCE {
                diverged = true;
                break;
            }
        }
        if iters_run % cfg.eval_every == 0 {
            let sw = quick_sw2(engine.student(), gmm, sched, k, solver, cfg.seed ^ iters_run)?;
            metrics_log.append(iters_run, &[sw])?;
        }
    }
    if diverged {
        if let Some(net) = &last_good {
            checkpoint::save(net, sched.t_max(), &[k], &dir.join(LAST_GOOD_CKPT))?;
        }
    }
    Ok(LoopOutput { student: engine.student().clone(), fake: None, iters_run, diverged })
}

pub fn cmd_distill(
    cfg: &RunConfig,
    mode: DistillMode,
    teacher_path: &Path,
    out_root: &Path,
) -> Result<DistillOutcome> {
    cfg.validate()?;
    let gmm = preset(&cfg.preset)?;
    let sched = schedule_for(cfg)?;
    let ckpt = load_checkpoint(teacher_path, cfg)?;
    require_teacher(&ckpt.net, teacher_path)?;
    check_dim(&ckpt.net, gmm.dim())?;

    let dcfg = mode.apply(&cfg.distill_config()?);
    dcfg.validate()?;

    let dir = allocate(
        out_root,
        &run_stem("distill", Some(mode.as_str()), &cfg.digest_short(), cfg.seed),
    )?;
    Manifest::new("distill", Some(mode.as_str()), cfg).write(&dir)?;
    let mut log = RunLog::create(&dir, RUNLOG_NAME, &DISTILL_COLUMNS)?;
    let mut metrics_log = RunLog::create(&dir, METRICS_LOG_NAME, &METRICS_COLUMNS)?;

    let out = if mode == DistillMode::InstanceTraj {
        if dcfg.k_list.len() != 1 {
            return Err(CliError::ConfigInvalid {
                reason: "instance-traj trains a single step count; k_list must have one entry"
                    .into(),
            });
        }
        let k = dcfg.k_list[0];
        let icfg = InstanceTrajConfig {
            k,
            batch: dcfg.batch,
            lr: dcfg.lr_generator,
            solver: dcfg.solver,
            ..InstanceTrajConfig::for_k(k)
        };
        let engine = InstanceTrajDistiller::new(ckpt.net, sched.clone(), icfg, cfg.seed)?;
        run_instance_loop(
            cfg,
            engine,
            &gmm,
            &sched,
            k,
            dcfg.solver,
            &mut log,
            &mut metrics_log,
            &dir,
        )?
    } else {
        let engine = Distiller::new(ckpt.net, sched.clone(), dcfg.clone(), cfg.seed)?;
        run_engine_loop(cfg, engine, &gmm, &sched, &mut log, &mut metrics_log, &dir)?
    };

    if out.diverged {
        return Ok(DistillOutcome { dir, iters_run: out.iters_run, diverged: true, report: None });
    }

    checkpoint::save(&out.student, sched.t_max(), &dcfg.k_list, &dir.join(STUDENT_CKPT))?;
    if let Some(fake) = &out.fake {
        checkpoint::save(fake, sched.t_max(), &dcfg.k_list, &dir.join(FAKE_CKPT))?;
    }

    let k_final = *dcfg.k_list.iter().max().expect("validated non-empty");
    let mut ev = evaluate_net(
        &out.student,
        &gmm,
        &sched,
        k_final,
        dcfg.solver,
        cfg.eval_samples,
        cfg.seed,
        &cfg.digest(),
    )?;
    ev.report.insert("iters_run", out.iters_run as f64)?;
    let mut dump_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6475_6d70);
    write_boundary_dumps(&dir, &ev, &gmm, &sched, &mut dump_rng)?;
    let report_path = dir.join(REPORT_NAME);
    std::fs::write(&report_path, ev.report.to_json()? + "\n")
        .map_err(|e| CliError::io(&report_path, e))?;

    Ok(DistillOutcome {
        dir,
        iters_run: out.iters_run,
        diverged: false,
        report: Some(ev.report),
    })
}
