//! Q-table checkpoints as CSV with a format-version header.
//!
//! ```text
//! # curricula-qtable v1
//! # key=expert_0_03_s1
//! # fingerprint=5f2c9e0a1b3d4c77
//! # final_score=31.5
//! # curve=2000:0;4000:3.2
//! state,a0,a1,a2
//! 0,0.25,1.5,-0.125
//! ```

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::agent::QTable;

pub const FORMAT_HEADER: &str = "# curricula-qtable v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub key: String,
    pub fingerprint: u64,
    pub final_score: f64,
    pub curve: Vec<(u64, f64)>,
}

pub fn to_text(meta: &CheckpointMeta, q: &QTable) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    out.push_str(&format!("# key={}\n", meta.key));
    out.push_str(&format!("# fingerprint={:016x}\n", meta.fingerprint));
    out.push_str(&format!("# final_score={}\n", meta.final_score));
    let curve: Vec<String> = meta.curve.iter().map(|(s, v)| format!("{s}:{v}")).collect();
    out.push_str(&format!("# curve={}\n", curve.join(";")));
    out.push_str("state");
    for a in 0..q.num_actions() {
        out.push_str(&format!(",a{a}"));
    }
    out.push('\n');
    for s in 0..q.num_states() {
        out.push_str(&s.to_string());
        for v in q.row(s) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse(text: &str) -> Result<(CheckpointMeta, QTable), CheckpointError> {
    let bad = |line: usize, reason: &str| CheckpointError::Malformed {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l == FORMAT_HEADER => {}
        _ => return Err(bad(1, "missing or unsupported format header")),
    }
    let mut meta = CheckpointMeta {
        key: String::new(),
        fingerprint: 0,
        final_score: f64::NAN,
        curve: Vec::new(),
    };
    let mut header = None;
    for (n, l) in lines.by_ref() {
        let Some(kv) = l.strip_prefix("# ") else {
            header = Some((n, l));
            break;
        };
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(n, "expected key=value"))?;
        match k {
            "key" => meta.key = v.to_string(),
            "fingerprint" => meta.fingerprint = u64::from_str_radix(v, 16).map_err(|_| bad(n, "bad fingerprint"))?,
            "final_score" => meta.final_score = v.parse().map_err(|_| bad(n, "bad final_score"))?,
            "curve" => {
                for point in v.split(';').filter(|p| !p.is_empty()) {
                    let (s, x) = point.split_once(':').ok_or_else(|| bad(n, "bad curve point"))?;
                    meta.curve.push((
                        s.parse().map_err(|_| bad(n, "bad curve step"))?,
                        x.parse().map_err(|_| bad(n, "bad curve value"))?,
                    ));
                }
            }
            _ => {}
        }
    }
    let (hn, header) = header.ok_or_else(|| bad(0, "missing table header"))?;
    let actions = header.split(',').count().saturating_sub(1);
    if !header.starts_with("state,") || actions == 0 {
        return Err(bad(hn, "expected `state,a0,...`"));
    }
    let mut values = Vec::new();
    let mut states = 0;
    for (n, l) in lines {
        let mut cells = l.split(',');
        let s: usize = cells.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad(n, "bad state index"))?;
        if s != states {
            return Err(bad(n, "states must be consecutive from 0"));
        }
        let row: Vec<f64> = cells
            .map(|c| c.parse::<f64>().map_err(|_| bad(n, "bad value")))
            .collect::<Result<_, _>>()?;
        if row.len() != actions {
            return Err(bad(n, "wrong number of action values"));
        }
        values.extend(row);
        states += 1;
    }
    let q = QTable::from_values(states, actions, values).ok_or_else(|| bad(0, "non-finite value"))?;
    Ok((meta, q))
}

/// Writes via a temporary file and rename.
pub fn save(path: &Path, meta: &CheckpointMeta, q: &QTable) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, to_text(meta, q)).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load(path: &Path) -> Result<(CheckpointMeta, QTable), CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}
