//! Output-directory policy: where runs live and how each one claims a fresh
//! directory so no command ever writes into a previous run's output.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Environment variable overriding the default output root.
pub const OUT_ROOT_ENV: &str = "TDM_OUT_ROOT";

/// Resolution order: explicit flag, then the environment variable, then
/// `./runs`.
pub fn out_root(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(v) = std::env::var_os(OUT_ROOT_ENV) {
        if !v.is_empty() {
            return PathBuf::from(v);
        }
    }
    PathBuf::from("runs")
}

/// Claims a fresh directory `root/<stem>` (or `root/<stem>-rN` when earlier
/// runs took the name). Creation doubles as the claim, so two concurrent
/// runs cannot share a directory.
pub fn allocate(root: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    for attempt in 1..10_000u32 {
        let name = if attempt == 1 { stem.to_string() } else { format!("{stem}-r{attempt}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::io(&dir, e)),
        }
    }
    Err(CliError::RunDir {
        path: root.to_path_buf(),
        reason: format!("no free name for '{stem}' after 9999 attempts"),
    })
}

/// Directory stem for a run: command, optional mode, config digest, seed.
pub fn run_stem(command: &str, mode: Option<&str>, digest_short: &str, seed: u64) -> String {
    match mode {
        Some(m) => format!("{command}-{m}-{digest_short}-s{seed}"),
        None => format!("{command}-{digest_short}-s{seed}"),
    }
}
