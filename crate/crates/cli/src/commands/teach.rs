//! `tdm teach`: train the teacher denoiser on a preset and verify its score
//! against the analytic diffused mixture.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdm_diffusion::{
    checkpoint, train_teacher, Denoiser, DenoiserNet, GaussianMixture, NetDenoiser, NoiseSchedule,
    Tensor,
};
use tdm_metrics::{exact_diffused_samples, MetricReport};

use crate::commands::{schedule_for, REPORT_NAME, TEACHER_CKPT};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::presets::preset;
use crate::rundir::{allocate, run_stem};
use crate::runlog::{Manifest, RunLog, RUNLOG_NAME, TEACH_COLUMNS};

/// Times (as fractions of the horizon) where the trained score is checked.
pub const SCORE_CHECK_FRACTIONS: [f64; 3] = [0.1, 0.5, 0.9];
const SCORE_CHECK_SAMPLES: usize = 2000;

#[derive(Debug)]
pub struct TeachOutcome {
    pub dir: PathBuf,
    /// (t, relative score error) at each checked time.
    pub score_errors: Vec<(f64, f64)>,
    pub final_loss: f64,
}

/// Mean score-error norm over exact diffused draws, relative to the mean
/// analytic score norm at the same time:
///
/// ```text
/// err(t) = E||s_net(x, t) - s*(x, t)|| / E||s*(x, t)||
/// ```
pub fn teacher_score_error<R: Rng + ?Sized>(
    net: &DenoiserNet,
    gmm: &GaussianMixture,
    sched: &NoiseSchedule,
    t: f64,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    let d = gmm.dim();
    let sigma = sched.sigma(t)?;
    let diffused = gmm.diffused(sigma)?;
    let x = exact_diffused_samples(gmm, sigma, n, rng)?;
    let den = NetDenoiser { net, k: None };
    let denoised = den.denoise(&Tensor::matrix(n, d, x.clone())?, sigma)?;
    let exact_scores = diffused.score_batch(&x);
    let s2 = sigma * sigma;
    let mut err_sum = 0.0;
    let mut ref_sum = 0.0;
    for (row, (net_row, exact_row)) in denoised
        .data()
        .chunks_exact(d)
        .zip(exact_scores.chunks_exact(d))
        .enumerate()
    {
        let mut err = 0.0;
        let mut norm = 0.0;
        for j in 0..d {
            let x_j = x[row * d + j];
            let s_net = (net_row[j] - x_j) / s2;
            let delta = s_net - exact_row[j];
            err += delta * delta;
            norm += exact_row[j] * exact_row[j];
        }
        err_sum += err.sqrt();
        ref_sum += norm.sqrt();
    }
    if ref_sum <= 0.0 {
        return Err(CliError::ConfigInvalid {
            reason: "degenerate reference scores in the teacher check".into(),
        });
    }
    Ok(err_sum / ref_sum)
}

pub fn cmd_teach(cfg: &RunConfig, out_root: &Path) -> Result<TeachOutcome> {
    cfg.validate()?;
    let gmm = preset(&cfg.preset)?;
    let sched = schedule_for(cfg)?;
    let dir = allocate(out_root, &run_stem("teach", None, &cfg.digest_short(), cfg.seed))?;
    Manifest::new("teach", None, cfg).write(&dir)?;
    let mut log = RunLog::create(&dir, RUNLOG_NAME, &TEACH_COLUMNS)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let run = train_teacher(&gmm, &sched, cfg.net_config(false)?, cfg.teacher_options(), &mut rng)?;
    for &(iter, loss) in &run.losses {
        log.append(iter as u64, &[loss])?;
    }
    let ckpt_path = dir.join(TEACHER_CKPT);
    checkpoint::save(&run.net, sched.t_max(), &[], &ckpt_path)?;

    let mut report = MetricReport::new(cfg.seed, cfg.digest(), SCORE_CHECK_SAMPLES);
    let mut score_errors = Vec::new();
    let mut check_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7363_6f72);
    for (i, frac) in SCORE_CHECK_FRACTIONS.iter().enumerate() {
        let t = frac * sched.t_max();
        let err =
            teacher_score_error(&run.net, &gmm, &sched, t, SCORE_CHECK_SAMPLES, &mut check_rng)?;
        report.insert(format!("score_err_{i}"), err)?;
        report.insert(format!("score_err_t_{i}"), t)?;
        score_errors.push((t, err));
    }
    let final_loss = run.losses.last().map(|&(_, l)| l).unwrap_or(f64::NAN);
    if final_loss.is_finite() {
        report.insert("loss_final", final_loss)?;
    }
    let json = report.to_json()?;
    let report_path = dir.join(REPORT_NAME);
    std::fs::write(&report_path, json + "\n").map_err(|e| CliError::io(&report_path, e))?;

    Ok(TeachOutcome { dir, score_errors, final_loss })
}
