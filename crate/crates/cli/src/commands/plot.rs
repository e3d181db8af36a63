//! `tdm plot`: render loss/metric curves and per-boundary scatter panels
//! from a finished run. Everything is parsed and rendered before the first
//! byte is written, so a failing input leaves no output behind.

use std::path::{Path, PathBuf};

use crate::dump::{boundary_file_name, read_samples, SampleDump};
use crate::error::{CliError, Result};
use crate::rundir::{allocate, run_stem};
use crate::runlog::{read_runlog, Manifest, ParsedLog, METRICS_LOG_NAME, RUNLOG_NAME};
use crate::svg::{curves_svg, scatter_svg, Series};

#[derive(Debug)]
pub struct PlotOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

fn curve_from(log: &ParsedLog, column: &str) -> Option<Series> {
    let values = log.column(column)?;
    let points: Vec<(f64, f64)> = log
        .iters
        .iter()
        .zip(&values)
        .map(|(&it, &v)| (it as f64, v))
        .collect();
    Some(Series::new(column, points))
}

fn scatter_points(dump: &SampleDump) -> Result<Vec<(f64, f64)>> {
    if dump.dim != 2 {
        return Err(CliError::PlotInput {
            reason: format!("scatter panels need 2-D samples, dump has dimension {}", dump.dim),
        });
    }
    Ok(dump.samples.chunks_exact(2).map(|r| (r[0], r[1])).collect())
}

/// Consecutive boundary dump pairs starting at index 0; a student file
/// without its exact partner is an error.
fn load_dumps(run_dir: &Path) -> Result<Vec<(usize, SampleDump, SampleDump)>> {
    let mut out = Vec::new();
    for i in 0.. {
        let student_path = run_dir.join(boundary_file_name(i, "student"));
        let exact_path = run_dir.join(boundary_file_name(i, "exact"));
        match (student_path.is_file(), exact_path.is_file()) {
            (false, false) => break,
            (true, true) => {
                let student = read_samples(&student_path)?;
                let exact = read_samples(&exact_path)?;
                if (student.t - exact.t).abs() > 1e-9 * student.t.abs().max(1.0) {
                    return Err(CliError::PlotInput {
                        reason: format!(
                            "boundary {i}: student dump at t = {}, exact dump at t = {}",
                            student.t, exact.t
                        ),
                    });
                }
                out.push((i, student, exact));
            }
            _ => {
                return Err(CliError::PlotInput {
                    reason: format!("boundary {i} has only one of its two sample dumps"),
                });
            }
        }
    }
    Ok(out)
}

pub fn cmd_plot(run_dir: &Path, out_root: &Path) -> Result<PlotOutcome> {
    let manifest = Manifest::load(run_dir)?;
    let log = read_runlog(&run_dir.join(RUNLOG_NAME))?;
    if log.is_empty() {
        return Err(CliError::PlotInput {
            reason: format!("{} has no logged rows; nothing to plot", run_dir.display()),
        });
    }

    let mut files: Vec<(String, String)> = Vec::new();

    let loss_series: Vec<Series> = ["loss", "loss_gen", "loss_fake"]
        .iter()
        .filter_map(|c| curve_from(&log, c))
        .collect();
    if loss_series.is_empty() {
        return Err(CliError::PlotInput {
            reason: format!("log columns {:?} carry no loss curve", log.columns),
        });
    }
    files.push((
        "losses.svg".into(),
        curves_svg(
            &format!("{} losses ({})", manifest.command, manifest.config_digest[..12].to_string()),
            "iteration",
            "loss",
            &loss_series,
            true,
        ),
    ));

    let metrics_path = run_dir.join(METRICS_LOG_NAME);
    if metrics_path.is_file() {
        let mlog = read_runlog(&metrics_path)?;
        if !mlog.is_empty() {
            let series: Vec<Series> = mlog
                .columns
                .iter()
                .skip(1)
                .filter_map(|c| curve_from(&mlog, c))
                .collect();
            files.push((
                "metrics.svg".into(),
                curves_svg("evaluation metrics", "iteration", "value", &series, true),
            ));
        }
    }

    for (i, student, exact) in load_dumps(run_dir)? {
        let panels = vec![
            Series::new("student", scatter_points(&student)?),
            Series::new("exact", scatter_points(&exact)?),
        ];
        files.push((
            format!("boundary_{i:02}.svg"),
            scatter_svg(&format!("boundary {i}  t = {:.3}", student.t), "x0", "x1", &panels),
        ));
    }

    let dir = allocate(
        out_root,
        &run_stem("plot", None, &manifest.config_digest[..12].to_string(), manifest.seed),
    )?;
    Manifest::new("plot", Some(&manifest.command), &manifest.config).write(&dir)?;
    let mut names = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = dir.join(&name);
        std::fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        names.push(name);
    }
    Ok(PlotOutcome { dir, files: names })
}
