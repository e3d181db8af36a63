use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Autodiff(#[from] tdm_autodiff::AutodiffError),
    #[error(transparent)]
    Diffusion(#[from] tdm_diffusion::DiffusionError),
    #[error(transparent)]
    Distill(#[from] tdm_distill::DistillError),
    #[error(transparent)]
    Metrics(#[from] tdm_metrics::MetricsError),
    #[error(transparent)]
    Checkpoint(#[from] tdm_diffusion::checkpoint::CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    ConfigParse { path: PathBuf, detail: String },
    #[error("invalid config: {reason}")]
    ConfigInvalid { reason: String },
    #[error("unknown preset '{name}'; available: {available}")]
    UnknownPreset { name: String, available: String },
    #[error("run log: {reason}")]
    RunLog { reason: String },
    #[error("run directory {path}: {reason}")]
    RunDir { path: PathBuf, reason: String },
    #[error("plot input: {reason}")]
    PlotInput { reason: String },
    #[error("training diverged at iteration {iteration}; last good checkpoint retained")]
    Diverged { iteration: u64 },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
