//! Versioned network checkpoints: a plain-text header describing the
//! architecture, then raw little-endian f64 parameters in canonical order.
//!
//! ```text
//! tdm-lab checkpoint v1
//! role=teacher
//! data_dim=2
//! hidden_width=128
//! hidden_layers=4
//! time_emb=8
//! k_emb=4
//! k_cond=0
//! data_std=1.4177446878757825
//! t_max=10
//! k_list=1,2,4          (optional)
//! params=59906
//! ---
//! <params × 8 bytes, f64 little-endian>
//! ```
//!
//! Parsing is strict: unknown or duplicate fields, size mismatches, trailing
//! bytes, and non-finite parameters are all rejected.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::error::DiffusionError;
use crate::net::{DenoiserNet, NetConfig, Role, K_EMB_DIM, TIME_EMB_DIM};

const MAGIC_V1: &str = "tdm-lab checkpoint v1";
const TERMINATOR: &[u8] = b"\n---\n";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("bad magic line {found:?}")]
    BadMagic { found: String },

    #[error("missing `---` header terminator")]
    MissingTerminator,

    #[error("header is not valid UTF-8")]
    HeaderEncoding,

    #[error("malformed header line {line:?}")]
    MalformedLine { line: String },

    #[error("unknown header field {field:?}")]
    UnknownField { field: String },

    #[error("duplicate header field {field:?}")]
    DuplicateField { field: String },

    #[error("missing header field `{field}`")]
    MissingField { field: &'static str },

    #[error("invalid value {value:?} for field `{field}`")]
    BadValue { field: &'static str, value: String },

    #[error("payload has {got} bytes, header declares {expected} parameters")]
    PayloadSize { expected: usize, got: usize },

    #[error("non-finite parameter at index {index}")]
    NonFiniteParam { index: usize },

    #[error(transparent)]
    Invalid(#[from] DiffusionError),
}

/// A decoded checkpoint: the network plus the schedule/conditioning context
/// needed to sample from it.
pub struct Checkpoint {
    pub net: DenoiserNet,
    pub t_max: f64,
    /// Step counts the student was trained for (empty for teachers).
    pub k_list: Vec<u32>,
}

pub fn encode(net: &DenoiserNet, t_max: f64, k_list: &[u32]) -> Vec<u8> {
    let cfg = net.config();
    let mut header = String::new();
    header.push_str(MAGIC_V1);
    header.push('\n');
    header.push_str(&format!("role={}\n", net.role().as_str()));
    header.push_str(&format!("data_dim={}\n", cfg.data_dim));
    header.push_str(&format!("hidden_width={}\n", cfg.hidden_width));
    header.push_str(&format!("hidden_layers={}\n", cfg.hidden_layers));
    header.push_str(&format!("time_emb={TIME_EMB_DIM}\n"));
    header.push_str(&format!("k_emb={K_EMB_DIM}\n"));
    header.push_str(&format!("k_cond={}\n", u8::from(cfg.k_cond)));
    header.push_str(&format!("data_std={}\n", cfg.data_std));
    header.push_str(&format!("t_max={t_max}\n"));
    if !k_list.is_empty() {
        let ks: Vec<String> = k_list.iter().map(|k| k.to_string()).collect();
        header.push_str(&format!("k_list={}\n", ks.join(",")));
    }
    let flat = net.flatten_params();
    header.push_str(&format!("params={}\n", flat.len()));
    header.push_str("---\n");

    let mut out = header.into_bytes();
    out.reserve(flat.len() * 8);
    for v in &flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let term_at = bytes
        .windows(TERMINATOR.len())
        .position(|w| w == TERMINATOR)
        .ok_or(CheckpointError::MissingTerminator)?;
    let header =
        std::str::from_utf8(&bytes[..term_at]).map_err(|_| CheckpointError::HeaderEncoding)?;
    let payload = &bytes[term_at + TERMINATOR.len()..];

    let mut lines = header.lines();
    let magic = lines.next().unwrap_or_default();
    if magic != MAGIC_V1 {
        return Err(CheckpointError::BadMagic {
            found: magic.to_string(),
        });
    }

    const KNOWN: [&str; 11] = [
        "role",
        "data_dim",
        "hidden_width",
        "hidden_layers",
        "time_emb",
        "k_emb",
        "k_cond",
        "data_std",
        "t_max",
        "k_list",
        "params",
    ];
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for line in lines {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CheckpointError::MalformedLine {
                line: line.to_string(),
            })?;
        if !KNOWN.contains(&key) {
            return Err(CheckpointError::UnknownField {
                field: key.to_string(),
            });
        }
        if fields.insert(key, value).is_some() {
            return Err(CheckpointError::DuplicateField {
                field: key.to_string(),
            });
        }
    }

    fn get<'a>(
        fields: &BTreeMap<&str, &'a str>,
        field: &'static str,
    ) -> Result<&'a str, CheckpointError> {
        fields
            .get(field)
            .copied()
            .ok_or(CheckpointError::MissingField { field })
    }
    fn parse_usize(
        fields: &BTreeMap<&str, &str>,
        field: &'static str,
    ) -> Result<usize, CheckpointError> {
        let v = get(fields, field)?;
        v.parse().map_err(|_| CheckpointError::BadValue {
            field,
            value: v.to_string(),
        })
    }
    fn parse_f64(
        fields: &BTreeMap<&str, &str>,
        field: &'static str,
    ) -> Result<f64, CheckpointError> {
        let v = get(fields, field)?;
        let x: f64 = v.parse().map_err(|_| CheckpointError::BadValue {
            field,
            value: v.to_string(),
        })?;
        if !x.is_finite() {
            return Err(CheckpointError::BadValue {
                field,
                value: v.to_string(),
            });
        }
        Ok(x)
    }

    let role_s = get(&fields, "role")?;
    let role = Role::parse(role_s).ok_or(CheckpointError::BadValue {
        field: "role",
        value: role_s.to_string(),
    })?;
    let data_dim = parse_usize(&fields, "data_dim")?;
    let hidden_width = parse_usize(&fields, "hidden_width")?;
    let hidden_layers = parse_usize(&fields, "hidden_layers")?;
    let time_emb = parse_usize(&fields, "time_emb")?;
    if time_emb != TIME_EMB_DIM {
        return Err(CheckpointError::BadValue {
            field: "time_emb",
            value: time_emb.to_string(),
        });
    }
    let k_emb = parse_usize(&fields, "k_emb")?;
    if k_emb != K_EMB_DIM {
        return Err(CheckpointError::BadValue {
            field: "k_emb",
            value: k_emb.to_string(),
        });
    }
    let k_cond = match get(&fields, "k_cond")? {
        "0" => false,
        "1" => true,
        other => {
            return Err(CheckpointError::BadValue {
                field: "k_cond",
                value: other.to_string(),
            })
        }
    };
    let data_std = parse_f64(&fields, "data_std")?;
    let t_max = parse_f64(&fields, "t_max")?;
    if t_max <= 0.0 {
        return Err(CheckpointError::BadValue {
            field: "t_max",
            value: t_max.to_string(),
        });
    }
    let k_list: Vec<u32> = match fields.get("k_list") {
        None => Vec::new(),
        Some(v) => v
            .split(',')
            .map(|p| {
                p.parse::<u32>()
                    .ok()
                    .filter(|&k| k >= 1)
                    .ok_or(CheckpointError::BadValue {
                        field: "k_list",
                        value: (*v).to_string(),
                    })
            })
            .collect::<Result<_, _>>()?,
    };
    let n_params = parse_usize(&fields, "params")?;

    if payload.len() != n_params * 8 {
        return Err(CheckpointError::PayloadSize {
            expected: n_params,
            got: payload.len(),
        });
    }
    let mut flat = Vec::with_capacity(n_params);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk size 8"));
        if !v.is_finite() {
            return Err(CheckpointError::NonFiniteParam { index: i });
        }
        flat.push(v);
    }

    let cfg = NetConfig {
        data_dim,
        hidden_width,
        hidden_layers,
        data_std,
        k_cond,
    };
    let net = DenoiserNet::from_parts(cfg, role, &flat)?;
    Ok(Checkpoint { net, t_max, k_list })
}

pub fn save(
    net: &DenoiserNet,
    t_max: f64,
    k_list: &[u32],
    path: &Path,
) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(net, t_max, k_list))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}
