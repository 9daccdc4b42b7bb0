//! Run manifests: what a command read, how it was configured and what it
//! wrote, with SHA-256 content hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<FileRecord>,
    pub params: BTreeMap<String, String>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileRecord>,
    /// RFC 3339, UTC. `SOURCE_DATE_EPOCH` pins it.
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|s| chrono::DateTime::from_timestamp(s, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            params: BTreeMap::new(),
            outputs: Vec::new(),
            timestamp: timestamp(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.insert(key.to_string(), value.to_string());
    }

    pub fn input_file(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Records built-in data by a pseudo-path such as `bundled:v1/freeway/expert`.
    pub fn input_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    /// Records every file under `dir` except the manifest itself.
    pub fn scan_outputs(&mut self, dir: &Path) -> CliResult<()> {
        let mut files = Vec::new();
        collect(dir, dir, &mut files)?;
        files.sort();
        self.outputs = files
            .into_iter()
            .filter(|rel| rel != Path::new(MANIFEST_FILE))
            .map(|rel| {
                Ok(FileRecord {
                    sha256: sha256_file(&dir.join(&rel))?,
                    path: rel.to_string_lossy().replace('\\', "/"),
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(CliError::data)?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))
    }

    /// Output files whose current hash differs from the record, or that are
    /// missing, or present but unlisted.
    pub fn verify(&self, dir: &Path) -> CliResult<Vec<String>> {
        let mut problems = Vec::new();
        for rec in &self.outputs {
            let path = dir.join(&rec.path);
            match sha256_file(&path) {
                Ok(h) if h == rec.sha256 => {}
                Ok(_) => problems.push(format!("{}: hash mismatch", rec.path)),
                Err(_) => problems.push(format!("{}: missing", rec.path)),
            }
        }
        let mut files = Vec::new();
        collect(dir, dir, &mut files)?;
        for rel in files {
            let rel = rel.to_string_lossy().replace('\\', "/");
            if rel != MANIFEST_FILE && !self.outputs.iter().any(|r| r.path == rel) {
                problems.push(format!("{rel}: not listed"));
            }
        }
        Ok(problems)
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}
