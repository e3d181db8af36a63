use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tdm_cli::commands::{cmd_ablate, cmd_distill, cmd_eval, cmd_plot, cmd_teach};
use tdm_cli::config::{DistillMode, RunConfig, Suite};
use tdm_cli::error::Result;
use tdm_cli::rundir::out_root;

#[derive(Parser)]
#[command(name = "tdm", version, about = "Few-step diffusion distillation on analytic mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a teacher denoiser on a preset and check its score accuracy.
    Teach {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root (default: $TDM_OUT_ROOT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distill a few-step student from a teacher checkpoint.
    Distill {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        teacher: PathBuf,
        /// tdm-l2 | tdm-huber | tdm-unify | clean-matching | instance-traj
        #[arg(long, default_value = "tdm-huber")]
        mode: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a checkpoint at a step count and score it against the preset.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        student: PathBuf,
        #[arg(long)]
        steps: u32,
        /// euler | heun (default: the config's solver)
        #[arg(long)]
        solver: Option<String>,
        /// Sample count (default: the config's eval_samples)
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render curves and boundary scatter panels from a finished run.
    Plot {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a predefined comparison suite over shared seeds and budget.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// importance | unify | clean-vs-noisy | solver-cross | shared-fake
        #[arg(long)]
        suite: String,
        #[arg(long)]
        teacher: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Teach { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let outcome = cmd_teach(&cfg, &out_root(out.as_deref()))?;
            println!("run: {}", outcome.dir.display());
            println!("final loss: {:.6}", outcome.final_loss);
            for (t, err) in &outcome.score_errors {
                println!("score error at t = {t:.3}: {:.4}", err);
            }
        }
        Command::Distill { config, teacher, mode, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let mode = DistillMode::parse(&mode)?;
            let outcome = cmd_distill(&cfg, mode, &teacher, &out_root(out.as_deref()))?;
            println!("run: {}", outcome.dir.display());
            if outcome.diverged {
                eprintln!(
                    "training diverged after {} iterations; last good checkpoint retained",
                    outcome.iters_run
                );
                return Ok(ExitCode::from(2));
            }
            if let Some(report) = &outcome.report {
                for (name, value) in report.metrics() {
                    println!("{name}: {value:.6}");
                }
            }
        }
        Command::Eval { config, student, steps, solver, samples, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let outcome = cmd_eval(
                &cfg,
                &student,
                steps,
                solver.as_deref(),
                samples,
                &out_root(out.as_deref()),
            )?;
            println!("run: {}", outcome.dir.display());
            if outcome.off_train {
                println!("off-train-steps: the checkpoint was not trained for {steps} steps");
            }
            for (name, value) in outcome.report.metrics() {
                println!("{name}: {value:.6}");
            }
        }
        Command::Plot { run, out } => {
            let outcome = cmd_plot(&run, &out_root(out.as_deref()))?;
            println!("run: {}", outcome.dir.display());
            for f in &outcome.files {
                println!("wrote {f}");
            }
        }
        Command::Ablate { config, suite, teacher, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let suite = Suite::parse(&suite)?;
            let outcome = cmd_ablate(&cfg, suite, teacher.as_deref(), &out_root(out.as_deref()))?;
            println!("run: {}", outcome.dir.display());
            // Per-arm seed averages; the full table is in table.csv.
            let mut sums: BTreeMap<(String, String), (f64, u32)> = BTreeMap::new();
            for r in &outcome.rows {
                let e = sums.entry((r.arm.clone(), r.metric.clone())).or_insert((0.0, 0));
                e.0 += r.value;
                e.1 += 1;
            }
            for ((arm, metric), (sum, n)) in &sums {
                println!("{arm} {metric}: mean {:.6} over {n} seeds", sum / f64::from(*n));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
