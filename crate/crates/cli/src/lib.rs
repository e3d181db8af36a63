//! Experiment driver for the distillation laboratory: named dataset presets,
//! a single JSON run configuration with a stable digest, append-only run
//! logs, and the five commands (`teach`, `distill`, `eval`, `plot`,
//! `ablate`).
//!
//! Every command claims a fresh directory under the output root (the `--out`
//! flag, the `TDM_OUT_ROOT` environment variable, or `./runs`), writes a
//! manifest first, and never touches a previous run's directory.  Re-running
//! a command with the same config and seed reproduces logs, checkpoints, and
//! rendered SVGs byte for byte.

pub mod commands;
pub mod config;
pub mod dump;
pub mod error;
pub mod presets;
pub mod rundir;
pub mod runlog;
pub mod svg;

pub use config::{DistillMode, RunConfig, Suite};
pub use error::{CliError, Result};
