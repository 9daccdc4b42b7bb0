//! Data files shipped with the crate (`data/v1/`), embedded at compile time.

use crate::design::{load_design, VariantId};
use crate::scores::{ingest_with_design, Grid, ScoreError, ScoreKind, ScoreTable, TransferMatrix};

/// Version of the bundled data tree.
pub const DATA_VERSION: &str = "v1";

macro_rules! data {
    ($path:expr) => {
        include_str!(concat!("../../../data/v1/", $path))
    };
}

pub fn design_text(title: &str) -> Option<&'static str> {
    Some(match title {
        "SpaceInvaders" => data!("designs/space_invaders.csv"),
        "Breakout" => data!("designs/breakout.csv"),
        "Freeway" => data!("designs/freeway.csv"),
        "MiniFreeway" => data!("designs/mini_freeway.csv"),
        _ => return None,
    })
}

/// Titles with published score tables.
pub const BUNDLED_TITLES: [&str; 3] = ["SpaceInvaders", "Breakout", "Freeway"];

/// Published score tables per title.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Expert,
    Scratch,
    ZeroShotDefault,
    FinetunedDefault,
    ScratchNormalized,
    ZeroShotDefaultNormalized,
    FinetunedDefaultNormalized,
    TransferRaw,
    TransferNormalized,
}

impl Table {
    pub const ALL: [Table; 9] = [
        Table::Expert,
        Table::Scratch,
        Table::ZeroShotDefault,
        Table::FinetunedDefault,
        Table::ScratchNormalized,
        Table::ZeroShotDefaultNormalized,
        Table::FinetunedDefaultNormalized,
        Table::TransferRaw,
        Table::TransferNormalized,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            Table::Expert => "expert",
            Table::Scratch => "scratch",
            Table::ZeroShotDefault => "zero_shot_default",
            Table::FinetunedDefault => "finetuned_default",
            Table::ScratchNormalized => "scratch_normalized",
            Table::ZeroShotDefaultNormalized => "zero_shot_default_normalized",
            Table::FinetunedDefaultNormalized => "finetuned_default_normalized",
            Table::TransferRaw => "transfer_raw",
            Table::TransferNormalized => "transfer_normalized",
        }
    }
}

pub fn title_dir(title: &str) -> Option<&'static str> {
    match title {
        "SpaceInvaders" => Some("space_invaders"),
        "Breakout" => Some("breakout"),
        "Freeway" => Some("freeway"),
        _ => None,
    }
}

macro_rules! title_tables {
    ($dir:literal, $table:expr) => {
        match $table {
            Table::Expert => data!(concat!("scores/", $dir, "/expert.csv")),
            Table::Scratch => data!(concat!("scores/", $dir, "/scratch.csv")),
            Table::ZeroShotDefault => data!(concat!("scores/", $dir, "/zero_shot_default.csv")),
            Table::FinetunedDefault => data!(concat!("scores/", $dir, "/finetuned_default.csv")),
            Table::ScratchNormalized => data!(concat!("scores/", $dir, "/scratch_normalized.csv")),
            Table::ZeroShotDefaultNormalized => {
                data!(concat!("scores/", $dir, "/zero_shot_default_normalized.csv"))
            }
            Table::FinetunedDefaultNormalized => {
                data!(concat!("scores/", $dir, "/finetuned_default_normalized.csv"))
            }
            Table::TransferRaw => data!(concat!("scores/", $dir, "/transfer_raw.csv")),
            Table::TransferNormalized => data!(concat!("scores/", $dir, "/transfer_normalized.csv")),
        }
    };
}

pub fn score_text(title: &str, table: Table) -> Option<&'static str> {
    Some(match title {
        "SpaceInvaders" => title_tables!("space_invaders", table),
        "Breakout" => title_tables!("breakout", table),
        "Freeway" => title_tables!("freeway", table),
        _ => return None,
    })
}

fn text(title: &str, table: Table) -> Result<&'static str, ScoreError> {
    score_text(title, table).ok_or_else(|| crate::design::DesignError::UnknownTitle(title.to_string()).into())
}

/// A bundled per-variant score table.
pub fn published_table(title: &str, table: Table) -> Result<ScoreTable, ScoreError> {
    let kind = match table {
        Table::Expert => ScoreKind::Expert,
        Table::Scratch | Table::ScratchNormalized => ScoreKind::ScratchReducedBudget,
        Table::ZeroShotDefault | Table::ZeroShotDefaultNormalized => ScoreKind::ZeroShotFrom(VariantId::DEFAULT),
        Table::FinetunedDefault | Table::FinetunedDefaultNormalized => {
            ScoreKind::FinetunedFrom(VariantId::DEFAULT)
        }
        Table::TransferRaw | Table::TransferNormalized => {
            return Err(ScoreError::Parse {
                line: 0,
                reason: format!("{} is a matrix, not a score table", table.file_stem()),
            })
        }
    };
    let design = load_design(title)?;
    ingest_with_design(text(title, table)?.as_bytes(), &design, kind)
}

/// A bundled transfer grid as published, `n/a` cells absent.
pub fn published_grid(title: &str, table: Table) -> Result<Grid, ScoreError> {
    let design = load_design(title)?;
    Grid::from_csv(text(title, table)?.as_bytes(), &design)
}

/// Published raw and normalized transfer grids with absent default-source
/// cells completed from the default zero-shot tables.
pub fn published_matrix(title: &str) -> Result<TransferMatrix, ScoreError> {
    let mut raw = published_grid(title, Table::TransferRaw)?;
    let mut normalized = published_grid(title, Table::TransferNormalized)?;
    raw.fill_source_column(VariantId::DEFAULT, &published_table(title, Table::ZeroShotDefault)?)?;
    normalized.fill_source_column(
        VariantId::DEFAULT,
        &published_table(title, Table::ZeroShotDefaultNormalized)?,
    )?;
    TransferMatrix::from_grids(title, raw, normalized)
}
