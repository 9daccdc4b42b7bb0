//! Writes command outputs under the `--out` directory. Tables are produced as
//! CSV text and converted to JSON records when `--format json` is chosen.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::{Map, Number, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
        })
    }

    pub fn sub(&self, name: &str) -> CliResult<Self> {
        Self::new(&self.dir.join(name), self.format)
    }

    /// Writes `contents` verbatim to `name` under the output directory.
    pub fn file(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Writes a table as `{stem}.csv` or `{stem}.json`.
    pub fn table(&self, stem: &str, csv_text: &str) -> CliResult<PathBuf> {
        match self.format {
            Format::Csv => self.file(&format!("{stem}.csv"), csv_text),
            Format::Json => {
                let json = csv_to_json(csv_text)?;
                self.file(&format!("{stem}.json"), &json)
            }
        }
    }
}

fn cell_value(cell: &str) -> Value {
    if cell.is_empty() || cell == curricula_core::scores::MISSING {
        return Value::Null;
    }
    match cell.parse::<f64>().ok().and_then(Number::from_f64) {
        Some(n) if !cell.contains('_') => Value::Number(n),
        _ => Value::String(cell.to_string()),
    }
}

/// Array of records keyed by header; repeated header names get `_1`, `_2`
/// suffixes. Numeric cells become numbers, missing cells null.
pub fn csv_to_json(csv_text: &str) -> CliResult<String> {
    let mut reader = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
    let raw: Vec<String> = reader.headers().map_err(CliError::data)?.iter().map(str::to_string).collect();
    let headers: Vec<String> = raw
        .iter()
        .enumerate()
        .map(|(i, h)| match raw[..i].iter().filter(|x| *x == h).count() {
            0 => h.clone(),
            n => format!("{h}_{n}"),
        })
        .collect();
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(CliError::data)?;
        let mut obj = Map::new();
        for (h, c) in headers.iter().zip(rec.iter()) {
            obj.insert(h.clone(), cell_value(c));
        }
        records.push(Value::Object(obj));
    }
    serde_json::to_string_pretty(&Value::Array(records))
        .map(|s| s + "\n")
        .map_err(CliError::data)
}
