//! On-disk sample dumps: one small CSV per trajectory boundary and series,
//! so plots can be re-rendered without re-running the sampler.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::runlog::fmt_value;

const DUMP_MAGIC: &str = "# tdm-samples-v1";

/// Samples recorded at one trajectory boundary, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDump {
    pub t: f64,
    pub dim: usize,
    pub samples: Vec<f64>,
}

impl SampleDump {
    pub fn n(&self) -> usize {
        self.samples.len() / self.dim
    }
}

/// `boundary_02_student.csv`, zero-padded so lexical order is boundary order.
pub fn boundary_file_name(index: usize, series: &str) -> String {
    format!("boundary_{index:02}_{series}.csv")
}

pub fn encode_samples(t: f64, dim: usize, samples: &[f64]) -> Result<String> {
    if dim == 0 || samples.len() % dim != 0 {
        return Err(CliError::PlotInput {
            reason: format!("{} values do not fill rows of dimension {dim}", samples.len()),
        });
    }
    let mut out = format!("{DUMP_MAGIC} t={} dim={dim}\n", fmt_value(t));
    for i in 0..dim {
        if i > 0 {
            out.push(',');
        }
        out.push('x');
        out.push_str(&i.to_string());
    }
    out.push('\n');
    for row in samples.chunks(dim) {
        for (i, &v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fmt_value(v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_samples(text: &str) -> Result<SampleDump> {
    let bad = |reason: String| CliError::PlotInput { reason };
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("");
    let rest = magic
        .strip_prefix(DUMP_MAGIC)
        .ok_or_else(|| bad(format!("bad dump magic {magic:?}")))?;
    let mut t = None;
    let mut dim = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("t=") {
            t = Some(v.parse::<f64>().map_err(|e| bad(format!("bad t {v:?}: {e}")))?);
        } else if let Some(v) = field.strip_prefix("dim=") {
            dim = Some(v.parse::<usize>().map_err(|e| bad(format!("bad dim {v:?}: {e}")))?);
        } else {
            return Err(bad(format!("unknown header field {field:?}")));
        }
    }
    let t = t.ok_or_else(|| bad("missing t in dump header".into()))?;
    let dim = dim.ok_or_else(|| bad("missing dim in dump header".into()))?;
    if !t.is_finite() || t < 0.0 {
        return Err(bad(format!("dump t must be finite and non-negative, got {t}")));
    }
    if dim == 0 || dim > 16 {
        return Err(bad(format!("dump dim must be in 1..=16, got {dim}")));
    }
    let header = lines.next().ok_or_else(|| bad("missing column header".into()))?;
    if header.split(',').count() != dim {
        return Err(bad(format!("column header {header:?} does not match dim {dim}")));
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(bad(format!("row {}: {} fields, want {dim}", lineno + 3, fields.len())));
        }
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|e| bad(format!("row {}: bad value {f:?}: {e}", lineno + 3)))?;
            if !v.is_finite() {
                return Err(bad(format!("row {}: non-finite value {v}", lineno + 3)));
            }
            samples.push(v);
        }
    }
    Ok(SampleDump { t, dim, samples })
}

pub fn write_samples(path: &Path, t: f64, dim: usize, samples: &[f64]) -> Result<()> {
    let text = encode_samples(t, dim, samples)?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<SampleDump> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_samples(&text).map_err(|e| match e {
        CliError::PlotInput { reason } => {
            CliError::PlotInput { reason: format!("{}: {reason}", path.display()) }
        }
        other => other,
    })
}
