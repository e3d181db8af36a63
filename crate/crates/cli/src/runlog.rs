//! Run artifacts: the JSON manifest and the append-only CSV log.
//!
//! Every run directory starts with a manifest describing what produced it;
//! the log writer refuses to open until the manifest is on disk, so a
//! half-written run is detectable by a log without rows, never by rows
//! without provenance.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const RUNLOG_NAME: &str = "runlog.csv";
pub const METRICS_LOG_NAME: &str = "metrics.csv";
const RUNLOG_MAGIC: &str = "# tdm-runlog-v1";

pub const DISTILL_COLUMNS: [&str; 10] = [
    "iter",
    "loss_gen",
    "loss_fake",
    "weight_mean",
    "weight_max",
    "grad_norm_gen",
    "grad_norm_fake",
    "k",
    "m",
    "tau",
];
pub const TEACH_COLUMNS: [&str; 2] = ["iter", "loss"];

/// Provenance record written into each run directory before anything else.
/// The creation timestamp is the one field expected to differ between
/// otherwise identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub command: String,
    pub mode: Option<String>,
    pub config_digest: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub created_unix_ms: u64,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, mode: Option<&str>, cfg: &RunConfig) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("tdm-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
        let created_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Manifest {
            format: "tdm-manifest-v1".into(),
            command: command.into(),
            mode: mode.map(str::to_string),
            config_digest: cfg.digest(),
            seed: cfg.seed,
            versions,
            created_unix_ms,
            config: cfg.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::RunLog { reason: format!("manifest serialization: {e}") })?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::RunLog {
            reason: format!("manifest {}: {e}", path.display()),
        })
    }
}

/// Formats a value so it parses back to the identical f64: integers stay
/// integers, everything else gets full precision, NaN spells itself out.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.17e}")
    }
}

/// Append-only CSV writer with strictly increasing iteration numbers.
pub struct RunLog {
    writer: BufWriter<File>,
    path: PathBuf,
    n_values: usize,
    last_iter: Option<u64>,
}

impl RunLog {
    /// Opens `dir/name` for writing. The directory must already hold a
    /// manifest and must not hold a log of the same name.
    pub fn create(dir: &Path, name: &str, columns: &[&str]) -> Result<Self> {
        if !dir.join(MANIFEST_NAME).is_file() {
            return Err(CliError::RunLog {
                reason: format!("{} has no manifest; write it before logging", dir.display()),
            });
        }
        if columns.first() != Some(&"iter") {
            return Err(CliError::RunLog { reason: "first log column must be 'iter'".into() });
        }
        let path = dir.join(name);
        if path.exists() {
            return Err(CliError::RunLog {
                reason: format!("{} already exists; runs are never amended", path.display()),
            });
        }
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{RUNLOG_MAGIC}").map_err(|e| CliError::io(&path, e))?;
        writeln!(writer, "{}", columns.join(",")).map_err(|e| CliError::io(&path, e))?;
        Ok(RunLog { writer, path, n_values: columns.len() - 1, last_iter: None })
    }

    pub fn append(&mut self, iter: u64, values: &[f64]) -> Result<()> {
        if values.len() != self.n_values {
            return Err(CliError::RunLog {
                reason: format!("row has {} values, log has {} columns", values.len(), self.n_values),
            });
        }
        if let Some(last) = self.last_iter {
            if iter <= last {
                return Err(CliError::RunLog {
                    reason: format!("iteration {iter} not above previous {last}"),
                });
            }
        }
        let mut line = iter.to_string();
        for &v in values {
            line.push(',');
            line.push_str(&fmt_value(v));
        }
        writeln!(self.writer, "{line}").map_err(|e| CliError::io(&self.path, e))?;
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        self.last_iter = Some(iter);
        Ok(())
    }
}

/// Fully parsed log: column names, iteration numbers, and the remaining
/// values row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub columns: Vec<String>,
    pub iters: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
}

impl ParsedLog {
    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    /// Values of one named column (excluding `iter`).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        if idx == 0 {
            return Some(self.iters.iter().map(|&i| i as f64).collect());
        }
        Some(self.rows.iter().map(|r| r[idx - 1]).collect())
    }
}

pub fn parse_runlog(text: &str) -> Result<ParsedLog> {
    let bad = |reason: String| CliError::RunLog { reason };
    let mut lines = text.lines();
    match lines.next() {
        Some(RUNLOG_MAGIC) => {}
        other => {
            return Err(bad(format!("bad log magic {:?}", other.unwrap_or(""))));
        }
    }
    let header = lines.next().ok_or_else(|| bad("missing header line".into()))?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    if columns.first().map(String::as_str) != Some("iter") {
        return Err(bad(format!("first column must be 'iter', got {:?}", columns.first())));
    }
    let mut iters = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(bad(format!(
                "row {} has {} fields, header has {}",
                lineno + 3,
                fields.len(),
                columns.len()
            )));
        }
        let iter: u64 = fields[0]
            .parse()
            .map_err(|e| bad(format!("row {}: bad iteration: {e}", lineno + 3)))?;
        if let Some(&last) = iters.last() {
            if iter <= last {
                return Err(bad(format!("iteration {iter} not above previous {last}")));
            }
        }
        let mut values = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|e| bad(format!("row {}: bad value {f:?}: {e}", lineno + 3)))?;
            values.push(v);
        }
        iters.push(iter);
        rows.push(values);
    }
    Ok(ParsedLog { columns, iters, rows })
}

pub fn read_runlog(path: &Path) -> Result<ParsedLog> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_runlog(&text).map_err(|e| match e {
        CliError::RunLog { reason } => CliError::RunLog {
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}
