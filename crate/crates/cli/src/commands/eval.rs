//! `tdm eval`: roll a checkpointed sampler for a requested step count and
//! measure it against the preset's analytic distribution.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdm_diffusion::{
    record_trajectory, DenoiserNet, GaussianMixture, NetDenoiser, NoiseSchedule, Solver,
};
use tdm_metrics::{
    exact_diffused_samples, grid_kl_floor, grid_kl_vs_analytic, mode_coverage, sliced_wasserstein,
    trajectory_marginal_distance, BoundaryDistance, GridSpec, MetricReport,
    DEFAULT_GRID_RESOLUTION, DEFAULT_MODE_RADIUS_STD,
};

use crate::commands::{check_dim, load_checkpoint, schedule_for, DUMP_ROWS, REPORT_NAME};
use crate::config::{parse_solver, RunConfig};
use crate::dump::{boundary_file_name, write_samples};
use crate::error::{CliError, Result};
use crate::presets::preset;
use crate::rundir::{allocate, run_stem};
use crate::runlog::Manifest;

const FINAL_PROJECTIONS: usize = 128;
const BOUNDARY_PROJECTIONS: usize = 64;

/// In-memory result of one sampler evaluation.
#[derive(Debug)]
pub struct Evaluation {
    pub report: MetricReport,
    pub boundaries: Vec<BoundaryDistance>,
    /// Ascending boundary times and the sampler states recorded there,
    /// flattened row-major; index 0 is the data end.
    pub boundary_times: Vec<f64>,
    pub boundary_states: Vec<Vec<f64>>,
}

impl Evaluation {
    pub fn finals(&self) -> &[f64] {
        &self.boundary_states[0]
    }
}

/// Rolls `steps`-step trajectories from noise and scores the final samples
/// (sliced W2, grid KL with its smoothing floor, mode coverage) plus every
/// intermediate boundary against exact diffused draws.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_net(
    net: &DenoiserNet,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    steps: u32,
    solver: Solver,
    n_samples: usize,
    seed: u64,
    digest: &str,
) -> Result<Evaluation> {
    let d = gmm.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6576_616c);
    let k_arg = if net.config().k_cond { Some(steps) } else { None };
    let den = NetDenoiser { net, k: k_arg };
    let traj = record_trajectory(&den, sched, steps, n_samples, solver, &mut rng)?;

    let boundaries = trajectory_marginal_distance(&traj, gmm, sched, BOUNDARY_PROJECTIONS, &mut rng)?;
    let mut boundary_times = Vec::with_capacity(steps as usize + 1);
    let mut boundary_states = Vec::with_capacity(steps as usize + 1);
    for b in &boundaries {
        boundary_times.push(b.t);
    }
    for i in 0..=steps as usize {
        let state = traj.state_at(i).ok_or_else(|| CliError::PlotInput {
            reason: format!("trajectory is missing boundary {i}"),
        })?;
        boundary_states.push(state.data().to_vec());
    }

    let finals = &boundary_states[0];
    let mut report = MetricReport::new(seed, digest, n_samples);
    report.insert("steps", f64::from(steps))?;

    let exact = exact_diffused_samples(gmm, 0.0, n_samples, &mut rng)?;
    let sw = sliced_wasserstein(finals, &exact, d, FINAL_PROJECTIONS, &mut rng)?;
    report.insert("sw2_final", sw)?;

    let grid = GridSpec::for_diffused(gmm, 0.0, DEFAULT_GRID_RESOLUTION)?;
    let kl = grid_kl_vs_analytic(finals, gmm, 0.0, &grid)?;
    let floor = grid_kl_floor(gmm, 0.0, &grid, n_samples, &mut rng)?;
    report.insert("grid_kl", kl.kl)?;
    report.insert("grid_oob", kl.oob_fraction)?;
    report.insert("grid_kl_floor", floor.kl)?;

    let cov = mode_coverage(finals, gmm, DEFAULT_MODE_RADIUS_STD)?;
    report.insert("mode_covered", cov.covered_count() as f64)?;
    report.insert("mode_total", gmm.n_components() as f64)?;
    report.insert("mode_assigned_frac", cov.assigned_fraction())?;

    for (i, b) in boundaries.iter().enumerate() {
        report.insert(format!("traj_dist_{i:02}"), b.distance)?;
        report.insert(format!("traj_floor_{i:02}"), b.floor)?;
    }

    Ok(Evaluation { report, boundaries, boundary_times, boundary_states })
}

/// Writes per-boundary sample dumps (student states next to exact diffused
/// draws) so plots can be rendered later without the checkpoint.
pub fn write_boundary_dumps<R: Rng + ?Sized>(
    dir: &Path,
    ev: &Evaluation,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<()> {
    let d = gmm.dim();
    for (i, (t, states)) in ev.boundary_times.iter().zip(&ev.boundary_states).enumerate() {
        let rows = DUMP_ROWS.min(states.len() / d);
        let student = &states[..rows * d];
        let sigma = sched.sigma(*t)?;
        let exact = exact_diffused_samples(gmm, sigma, rows, rng)?;
        write_samples(&dir.join(boundary_file_name(i, "student")), *t, d, student)?;
        write_samples(&dir.join(boundary_file_name(i, "exact")), *t, d, &exact)?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub dir: PathBuf,
    pub report: MetricReport,
    pub off_train: bool,
}

pub fn cmd_eval(
    cfg: &RunConfig,
    student_path: &Path,
    steps: u32,
    solver_flag: Option<&str>,
    samples_flag: Option<usize>,
    out_root: &Path,
) -> Result<EvalOutcome> {
    cfg.validate()?;
    if steps == 0 {
        return Err(CliError::ConfigInvalid { reason: "steps must be positive".into() });
    }
    let gmm = preset(&cfg.preset)?;
    let sched = schedule_for(cfg)?;
    let ckpt = load_checkpoint(student_path, cfg)?;
    check_dim(&ckpt.net, gmm.dim())?;
    let solver = match solver_flag {
        Some(name) => parse_solver(name)?,
        None => cfg.distill_config()?.solver,
    };
    let n_samples = samples_flag.unwrap_or(cfg.eval_samples);
    if n_samples < 1000 {
        return Err(CliError::ConfigInvalid {
            reason: format!("eval needs at least 1000 samples, got {n_samples}"),
        });
    }
    let off_train = !ckpt.k_list.is_empty() && !ckpt.k_list.contains(&steps);

    let dir = allocate(out_root, &run_stem("eval", None, &cfg.digest_short(), cfg.seed))?;
    Manifest::new("eval", None, cfg).write(&dir)?;

    let mut ev =
        evaluate_net(&ckpt.net, &gmm, &sched, steps, solver, n_samples, cfg.seed, &cfg.digest())?;
    ev.report.insert("off_train_steps", if off_train { 1.0 } else { 0.0 })?;

    let mut dump_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6475_6d70);
    write_boundary_dumps(&dir, &ev, &gmm, &sched, &mut dump_rng)?;

    let report_path = dir.join(REPORT_NAME);
    std::fs::write(&report_path, ev.report.to_json()? + "\n")
        .map_err(|e| CliError::io(&report_path, e))?;

    Ok(EvalOutcome { dir, report: ev.report, off_train })
}
