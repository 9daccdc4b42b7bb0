//! Score tables, variant-expert normalization, transfer matrices and
//! source-selection strategies.
//!
//! Score-table CSV: header `variant,score[,score...]`, one row per variant,
//! cells numeric or `n/a`. Transfer-matrix CSV: the first row holds source
//! labels (after a corner cell), the first column target labels.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{load_design, DesignError, FactorialDesign, VariantId};

pub const MISSING: &str = "n/a";

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("empty score table")]
    Empty,
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("undefined normalization: expert score is zero")]
    UndefinedNormalization,
    #[error("title mismatch: expected {expected}, found {found}")]
    TitleMismatch { expected: String, found: String },
    #[error("no expert score for target {0}")]
    MissingExpert(VariantId),
    #[error("target {target} has only {available} defined sources; top3 needs 3")]
    TooFewSources { target: VariantId, available: usize },
    #[error("matrix has no {0} source column")]
    MissingSource(VariantId),
    #[error("no targets to summarise for strategy {0}")]
    NoTargets(Strategy),
}

impl ScoreError {
    fn parse(line: usize, reason: impl Into<String>) -> Self {
        ScoreError::Parse {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreKind {
    Expert,
    ZeroShotFrom(VariantId),
    FinetunedFrom(VariantId),
    ScratchReducedBudget,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreKind::Expert => write!(f, "expert"),
            ScoreKind::ZeroShotFrom(s) => write!(f, "zero_shot_from({s})"),
            ScoreKind::FinetunedFrom(s) => write!(f, "finetuned_from({s})"),
            ScoreKind::ScratchReducedBudget => write!(f, "scratch_reduced_budget"),
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = |prefix: &str| -> Option<Result<VariantId, String>> {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .map(|v| v.parse().map_err(|e: DesignError| e.to_string()))
        };
        match s {
            "expert" => Ok(ScoreKind::Expert),
            "scratch" | "scratch_reduced_budget" => Ok(ScoreKind::ScratchReducedBudget),
            _ => {
                if let Some(v) = inner("zero_shot_from(") {
                    Ok(ScoreKind::ZeroShotFrom(v?))
                } else if let Some(v) = inner("finetuned_from(") {
                    Ok(ScoreKind::FinetunedFrom(v?))
                } else {
                    Err(format!(
                        "unknown score kind `{s}` (expert, scratch, zero_shot_from(X_YZ), finetuned_from(X_YZ))"
                    ))
                }
            }
        }
    }
}

/// Raw scores (game points) per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub title: String,
    pub kind: ScoreKind,
    entries: BTreeMap<VariantId, Vec<f64>>,
}

impl ScoreTable {
    pub fn new(title: impl Into<String>, kind: ScoreKind) -> Self {
        Self {
            title: title.into(),
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Inserts scores for a variant, validating it against the design.
    pub fn insert(
        &mut self,
        design: &FactorialDesign,
        id: VariantId,
        scores: Vec<f64>,
    ) -> Result<(), ScoreError> {
        if !design.contains(id) {
            return Err(DesignError::InvalidVariant {
                title: design.title.clone(),
                id,
            }
            .into());
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(ScoreError::parse(0, format!("non-finite score {bad} for {id}")));
        }
        self.entries.insert(id, scores);
        Ok(())
    }

    pub fn get(&self, id: VariantId) -> Option<&[f64]> {
        self.entries.get(&id).map(Vec::as_slice)
    }

    /// Mean of the defined scores, `None` when the cell is absent.
    pub fn mean(&self, id: VariantId) -> Option<f64> {
        self.get(id).and_then(mean)
    }

    pub fn variants(&self) -> impl Iterator<Item = VariantId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VariantId, &[f64])> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every (variant, score) pair, in variant order.
    pub fn observations(&self) -> Vec<(VariantId, f64)> {
        self.entries
            .iter()
            .flat_map(|(v, s)| s.iter().map(move |x| (*v, *x)))
            .collect()
    }

    /// Copies cells from `other` wherever this table has no defined score.
    pub fn fill_missing_from(&mut self, other: &ScoreTable) -> Result<usize, ScoreError> {
        if other.title != self.title {
            return Err(ScoreError::TitleMismatch {
                expected: self.title.clone(),
                found: other.title.clone(),
            });
        }
        let mut filled = 0;
        for (id, scores) in &other.entries {
            let slot = self.entries.entry(*id).or_default();
            if slot.is_empty() && !scores.is_empty() {
                *slot = scores.clone();
                filled += 1;
            }
        }
        Ok(filled)
    }

    pub fn to_csv(&self) -> String {
        let width = self.entries.values().map(Vec::len).max().unwrap_or(1).max(1);
        let mut out = String::from("variant");
        for _ in 0..width {
            out.push_str(",score");
        }
        out.push('\n');
        for (id, scores) in &self.entries {
            out.push_str(&id.to_string());
            for i in 0..width {
                out.push(',');
                match scores.get(i) {
                    Some(s) => out.push_str(&format_full(*s)),
                    None => out.push_str(MISSING),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_full(x: f64) -> String {
    format!("{x}")
}

fn parse_cell(cell: &str, line: usize) -> Result<Option<f64>, ScoreError> {
    let cell = cell.trim();
    if cell.eq_ignore_ascii_case(MISSING) {
        return Ok(None);
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| ScoreError::parse(line, format!("malformed number `{cell}`")))?;
    if !v.is_finite() {
        return Err(ScoreError::parse(line, format!("non-finite score `{cell}`")));
    }
    Ok(Some(v))
}

fn csv_reader<R: Read>(stream: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(stream)
}

fn read_records<R: Read>(stream: R) -> Result<Vec<(usize, Vec<String>)>, ScoreError> {
    let mut rows = Vec::new();
    for rec in csv_reader(stream).records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            ScoreError::parse(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

/// Parses a score-table CSV and validates it against the title's design.
pub fn ingest_score_table<R: Read>(
    stream: R,
    title: &str,
    kind: ScoreKind,
) -> Result<ScoreTable, ScoreError> {
    let design = load_design(title)?;
    ingest_with_design(stream, &design, kind)
}

pub fn ingest_with_design<R: Read>(
    stream: R,
    design: &FactorialDesign,
    kind: ScoreKind,
) -> Result<ScoreTable, ScoreError> {
    let rows = read_records(stream)?;
    let mut rows = rows.into_iter();
    let (line, header) = rows.next().ok_or(ScoreError::Empty)?;
    if header.len() < 2
        || header[0] != "variant"
        || header[1..].iter().any(|h| h != "score")
    {
        return Err(ScoreError::parse(line, "expected header `variant,score[,score...]`"));
    }
    let mut table = ScoreTable::new(design.title.clone(), kind);
    for (line, row) in rows {
        let id: VariantId = row[0]
            .parse()
            .map_err(|e: DesignError| ScoreError::parse(line, e.to_string()))?;
        if !design.contains(id) {
            return Err(ScoreError::parse(
                line,
                format!("unknown variant {id} for {}", design.title),
            ));
        }
        if table.entries.contains_key(&id) {
            return Err(ScoreError::parse(line, format!("duplicate row for {id}")));
        }
        if row.len() < 2 {
            return Err(ScoreError::parse(line, "row has no score cells"));
        }
        let scores = row[1..]
            .iter()
            .map(|c| parse_cell(c, line))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        table.entries.insert(id, scores);
    }
    if table.is_empty() {
        return Err(ScoreError::Empty);
    }
    Ok(table)
}

/// `100 * raw / expert`.
pub fn normalize_score(raw: f64, expert: f64) -> Result<f64, ScoreError> {
    if expert == 0.0 {
        return Err(ScoreError::UndefinedNormalization);
    }
    Ok(100.0 * raw / expert)
}

/// Labelled targets x sources grid with optional cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub targets: Vec<VariantId>,
    pub sources: Vec<VariantId>,
    /// `cells[t][s]`.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Grid {
    pub fn empty(targets: Vec<VariantId>, sources: Vec<VariantId>) -> Self {
        let cells = vec![vec![None; sources.len()]; targets.len()];
        Self {
            targets,
            sources,
            cells,
        }
    }

    pub fn get(&self, target: VariantId, source: VariantId) -> Option<f64> {
        let t = self.targets.iter().position(|v| *v == target)?;
        let s = self.sources.iter().position(|v| *v == source)?;
        self.cells[t][s]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("target\\source");
        for s in &self.sources {
            out.push(',');
            out.push_str(&s.to_string());
        }
        out.push('\n');
        for (t, row) in self.targets.iter().zip(&self.cells) {
            out.push_str(&t.to_string());
            for c in row {
                out.push(',');
                match c {
                    Some(v) => out.push_str(&format_full(*v)),
                    None => out.push_str(MISSING),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Same layout with values rounded to two decimals, as in report tables.
    pub fn to_rounded_csv(&self) -> String {
        let mut out = String::from("target\\source");
        for s in &self.sources {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        for (t, row) in self.targets.iter().zip(&self.cells) {
            out.push_str(&t.to_string());
            for c in row {
                match c {
                    Some(v) => out.push_str(&format!(",{v:.2}")),
                    None => out.push_str(",n/a"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv<R: Read>(stream: R, design: &FactorialDesign) -> Result<Self, ScoreError> {
        let rows = read_records(stream)?;
        let mut rows = rows.into_iter();
        let (line, header) = rows.next().ok_or(ScoreError::Empty)?;
        let label = |s: &str, line: usize| -> Result<VariantId, ScoreError> {
            let id: VariantId = s
                .parse()
                .map_err(|e: DesignError| ScoreError::parse(line, e.to_string()))?;
            if !design.contains(id) {
                return Err(ScoreError::parse(
                    line,
                    format!("unknown variant {id} for {}", design.title),
                ));
            }
            Ok(id)
        };
        let sources = header[1..]
            .iter()
            .map(|s| label(s, line))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, s) in sources.iter().enumerate() {
            if sources[..i].contains(s) {
                return Err(ScoreError::parse(line, format!("duplicate source column {s}")));
            }
        }
        let mut targets = Vec::new();
        let mut cells = Vec::new();
        for (line, row) in rows {
            let t = label(&row[0], line)?;
            if targets.contains(&t) {
                return Err(ScoreError::parse(line, format!("duplicate target row {t}")));
            }
            if row.len() != sources.len() + 1 {
                return Err(ScoreError::parse(
                    line,
                    format!("expected {} cells, found {}", sources.len(), row.len() - 1),
                ));
            }
            targets.push(t);
            cells.push(
                row[1..]
                    .iter()
                    .map(|c| parse_cell(c, line))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        if targets.is_empty() {
            return Err(ScoreError::Empty);
        }
        Ok(Self {
            targets,
            sources,
            cells,
        })
    }

    /// Fills absent cells of one source column from a score table. Returns
    /// the number of cells filled.
    pub fn fill_source_column(&mut self, source: VariantId, table: &ScoreTable) -> Result<usize, ScoreError> {
        let j = self
            .sources
            .iter()
            .position(|s| *s == source)
            .ok_or(ScoreError::MissingSource(source))?;
        let mut filled = 0;
        for (i, t) in self.targets.iter().enumerate() {
            if self.cells[i][j].is_none() {
                if let Some(v) = table.mean(*t) {
                    self.cells[i][j] = Some(v);
                    filled += 1;
                }
            }
        }
        Ok(filled)
    }

    /// Splits the grid into one score table per source column.
    pub fn source_tables(&self, title: &str) -> BTreeMap<VariantId, ScoreTable> {
        self.sources
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let mut t = ScoreTable::new(title, ScoreKind::ZeroShotFrom(*s));
                for (i, target) in self.targets.iter().enumerate() {
                    if let Some(v) = self.cells[i][j] {
                        t.entries.insert(*target, vec![v]);
                    }
                }
                (*s, t)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub title: String,
    pub raw: Grid,
    pub normalized: Grid,
}

impl TransferMatrix {
    pub fn sources(&self) -> &[VariantId] {
        &self.normalized.sources
    }

    pub fn targets(&self) -> &[VariantId] {
        &self.normalized.targets
    }

    /// Reassembles a matrix from its serialized raw and normalized grids.
    pub fn from_grids(title: impl Into<String>, raw: Grid, normalized: Grid) -> Result<Self, ScoreError> {
        if raw.targets != normalized.targets || raw.sources != normalized.sources {
            return Err(ScoreError::parse(0, "raw and normalized grids have different labels"));
        }
        Ok(Self {
            title: title.into(),
            raw,
            normalized,
        })
    }

    /// A matrix known only through its normalized grid.
    pub fn from_normalized(title: impl Into<String>, normalized: Grid) -> Self {
        let raw = Grid::empty(normalized.targets.clone(), normalized.sources.clone());
        Self {
            title: title.into(),
            raw,
            normalized,
        }
    }
}

/// Builds the targets x sources matrix. Targets are every variant evaluated by
/// at least one source, in canonical order; each raw cell is the mean of the
/// evaluation table's scores for that target. A target whose expert scored 0
/// keeps its raw row and an undefined normalized row.
pub fn build_transfer_matrix(
    expert: &ScoreTable,
    evaluations: &BTreeMap<VariantId, ScoreTable>,
) -> Result<TransferMatrix, ScoreError> {
    for table in evaluations.values() {
        if table.title != expert.title {
            return Err(ScoreError::TitleMismatch {
                expected: expert.title.clone(),
                found: table.title.clone(),
            });
        }
    }
    let sources: Vec<VariantId> = evaluations.keys().copied().collect();
    let mut targets: Vec<VariantId> = evaluations
        .values()
        .flat_map(|t| t.variants())
        .collect();
    targets.sort();
    targets.dedup();

    let mut raw = Grid::empty(targets.clone(), sources.clone());
    let mut normalized = Grid::empty(targets.clone(), sources.clone());
    for (i, target) in targets.iter().enumerate() {
        let expert_score = expert.mean(*target).ok_or(ScoreError::MissingExpert(*target))?;
        if expert_score == 0.0 {
            log::warn!("{}: expert score for {target} is 0; normalized row left undefined", expert.title);
        }
        for (j, source) in sources.iter().enumerate() {
            if let Some(r) = evaluations[source].mean(*target) {
                raw.cells[i][j] = Some(r);
                if expert_score != 0.0 {
                    normalized.cells[i][j] = Some(normalize_score(r, expert_score)?);
                }
            }
        }
    }
    Ok(TransferMatrix {
        title: expert.title.clone(),
        raw,
        normalized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Default,
    Random,
    Top3,
    Best,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Default, Strategy::Random, Strategy::Top3, Strategy::Best];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Default => "default",
            Strategy::Random => "random",
            Strategy::Top3 => "top3",
            Strategy::Best => "best",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub per_target: BTreeMap<VariantId, f64>,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
}

/// Quantile with linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted sample).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Evaluates a source-selection strategy on the normalized grid.
///
/// `default` reads the 0_00 column on every other target. The other
/// strategies pick among all defined sources except the target itself:
/// `best` takes the maximum, `top3` the mean of the three largest, `random`
/// the mean over all of them. Missing cells never enter a pool.
pub fn strategy_eval(matrix: &TransferMatrix, strategy: Strategy) -> Result<StrategySummary, ScoreError> {
    let grid = &matrix.normalized;
    let mut per_target = BTreeMap::new();
    match strategy {
        Strategy::Default => {
            let col = grid
                .sources
                .iter()
                .position(|s| s.is_default())
                .ok_or(ScoreError::MissingSource(VariantId::DEFAULT))?;
            for (i, t) in grid.targets.iter().enumerate() {
                if t.is_default() {
                    continue;
                }
                if let Some(v) = grid.cells[i][col] {
                    per_target.insert(*t, v);
                }
            }
        }
        _ => {
            for (i, t) in grid.targets.iter().enumerate() {
                let mut pool: Vec<f64> = grid
                    .sources
                    .iter()
                    .zip(&grid.cells[i])
                    .filter(|(s, _)| *s != t)
                    .filter_map(|(_, c)| *c)
                    .collect();
                if pool.is_empty() {
                    continue;
                }
                pool.sort_by(|a, b| b.total_cmp(a));
                let value = match strategy {
                    Strategy::Best => pool[0],
                    Strategy::Top3 => {
                        if pool.len() < 3 {
                            return Err(ScoreError::TooFewSources {
                                target: *t,
                                available: pool.len(),
                            });
                        }
                        pool[..3].iter().sum::<f64>() / 3.0
                    }
                    Strategy::Random => pool.iter().sum::<f64>() / pool.len() as f64,
                    Strategy::Default => unreachable!(),
                };
                per_target.insert(*t, value);
            }
        }
    }
    let mut values: Vec<f64> = per_target.values().copied().collect();
    if values.is_empty() {
        return Err(ScoreError::NoTargets(strategy));
    }
    values.sort_by(f64::total_cmp);
    Ok(StrategySummary {
        strategy,
        median: quantile(&values, 0.5),
        lower_quartile: quantile(&values, 0.25),
        upper_quartile: quantile(&values, 0.75),
        per_target,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopK<C> {
    pub selected: Vec<(C, f64)>,
    /// Fewer runs than requested were available.
    pub short: bool,
}

impl<C> TopK<C> {
    pub fn scores(&self) -> Vec<f64> {
        self.selected.iter().map(|(_, s)| *s).collect()
    }
}

/// The `k` best runs by final score; ties keep input order.
pub fn select_top_k<C: Clone>(runs: &[(C, f64)], k: usize) -> TopK<C> {
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[b].1.total_cmp(&runs[a].1));
    let selected = order.iter().take(k).map(|&i| runs[i].clone()).collect();
    if runs.len() < k {
        log::warn!("top-{k} selection over only {} runs", runs.len());
    }
    TopK {
        selected,
        short: runs.len() < k,
    }
}
