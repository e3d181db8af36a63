//! The five commands. Each one claims a fresh run directory, writes the
//! manifest first, then its logs and artifacts.

mod ablate;
mod distill;
mod eval;
mod plot;
mod teach;

pub use ablate::{cmd_ablate, AblateOutcome, TableRow};
pub use distill::{cmd_distill, DistillOutcome};
pub use eval::{cmd_eval, evaluate_net, EvalOutcome, Evaluation};
pub use plot::{cmd_plot, PlotOutcome};
pub use teach::{cmd_teach, teacher_score_error, TeachOutcome};

use std::path::Path;

use tdm_diffusion::checkpoint::Checkpoint;
use tdm_diffusion::{DenoiserNet, NoiseSchedule};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const TEACHER_CKPT: &str = "teacher.ckpt";
pub const STUDENT_CKPT: &str = "student.ckpt";
pub const FAKE_CKPT: &str = "fake.ckpt";
pub const LAST_GOOD_CKPT: &str = "student_last_good.ckpt";
pub const REPORT_NAME: &str = "report.json";

/// Rows kept per series when dumping boundary samples for plotting.
pub const DUMP_ROWS: usize = 800;

pub(crate) fn load_checkpoint(path: &Path, cfg: &RunConfig) -> Result<Checkpoint> {
    let ckpt = tdm_diffusion::checkpoint::load(path)?;
    let t_max = cfg.schedule()?.t_max();
    if (ckpt.t_max - t_max).abs() > 1e-9 * t_max.max(1.0) {
        return Err(CliError::ConfigInvalid {
            reason: format!(
                "checkpoint {} was trained with t_max = {}, config says {}",
                path.display(),
                ckpt.t_max,
                t_max
            ),
        });
    }
    Ok(ckpt)
}

pub(crate) fn require_teacher(net: &DenoiserNet, path: &Path) -> Result<()> {
    if net.config().k_cond {
        return Err(CliError::ConfigInvalid {
            reason: format!("{} is step-count conditioned; a teacher must not be", path.display()),
        });
    }
    Ok(())
}

pub(crate) fn check_dim(net: &DenoiserNet, dim: usize) -> Result<()> {
    if net.config().data_dim != dim {
        return Err(CliError::ConfigInvalid {
            reason: format!(
                "checkpoint is {}-dimensional, preset is {}-dimensional",
                net.config().data_dim,
                dim
            ),
        });
    }
    Ok(())
}

pub(crate) fn schedule_for(cfg: &RunConfig) -> Result<NoiseSchedule> {
    cfg.schedule()
}
