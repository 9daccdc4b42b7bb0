//! Factorial designs of game curricula.
//!
//! Every game title is a full-factorial design: each variant (a difficulty
//! switch position plus a game-mode code) corresponds to exactly one
//! assignment of levels to the title's categorical factors. The mapping
//! between mode codes and factor levels is shipped as data
//! (`data/v1/designs/*.csv`), never derived from bit arithmetic.
//!
//! The data file layout is two CSV sections separated by a blank line:
//!
//! ```text
//! title,factor,levels
//! Freeway,Difficulty,Off;On
//! Freeway,Traffic,Default;Thick;Thicker;Thickest
//! Freeway,Speeds,Constant;Randomised
//!
//! difficulty_bit,mode_code,Difficulty,Traffic,Speeds
//! 0,0,Off,Default,Constant
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundled;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("unknown title `{0}`; known titles: SpaceInvaders, Breakout, Freeway, MiniFreeway")]
    UnknownTitle(String),
    #[error("invalid variant label `{0}` (expected X_YZ, e.g. 0_08)")]
    BadLabel(String),
    #[error("variant {id} does not exist in the {title} design")]
    InvalidVariant { title: String, id: VariantId },
    #[error("invalid factor levels {levels:?} for {title}: {reason}")]
    InvalidLevels {
        title: String,
        levels: Vec<usize>,
        reason: String,
    },
    #[error("malformed design data at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot build a model matrix from zero observations")]
    NoObservations,
}

/// One categorical factor. Level 0 is the default level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub levels: Vec<String>,
}

impl FactorSpec {
    pub fn new(name: impl Into<String>, levels: Vec<String>) -> Result<Self, DesignError> {
        let name = name.into();
        if levels.len() < 2 {
            return Err(DesignError::Malformed {
                line: 0,
                reason: format!("factor `{name}` needs at least two levels"),
            });
        }
        for (i, level) in levels.iter().enumerate() {
            if level.is_empty() || levels[..i].contains(level) {
                return Err(DesignError::Malformed {
                    line: 0,
                    reason: format!("factor `{name}` has an empty or repeated level `{level}`"),
                });
            }
        }
        Ok(Self { name, levels })
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn default_level(&self) -> usize {
        0
    }
}

/// A variant identifier in `X_YZ` notation: difficulty switch position and
/// game-mode code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariantId {
    pub difficulty_bit: u8,
    pub mode_code: u16,
}

impl VariantId {
    pub const DEFAULT: VariantId = VariantId {
        difficulty_bit: 0,
        mode_code: 0,
    };

    pub fn new(difficulty_bit: u8, mode_code: u16) -> Self {
        Self {
            difficulty_bit,
            mode_code,
        }
    }

    pub fn is_default(&self) -> bool {
        *self == Self::DEFAULT
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{:02}", self.difficulty_bit, self.mode_code)
    }
}

impl FromStr for VariantId {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DesignError::BadLabel(s.to_string());
        let (x, yz) = s.trim().split_once('_').ok_or_else(bad)?;
        if yz.len() < 2 || !yz.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let difficulty_bit = match x {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad()),
        };
        let mode_code = yz.parse().map_err(|_| bad())?;
        Ok(Self {
            difficulty_bit,
            mode_code,
        })
    }
}

/// One level index per factor, in design order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactorLevels(pub Vec<usize>);

impl FactorLevels {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorialDesign {
    pub title: String,
    pub factors: Vec<FactorSpec>,
    variants: Vec<VariantId>,
    to_levels: BTreeMap<VariantId, FactorLevels>,
    to_variant: BTreeMap<FactorLevels, VariantId>,
}

impl FactorialDesign {
    /// Builds a design from an explicit mode map, checking that the map is a
    /// bijection onto the full factorial.
    pub fn new(
        title: impl Into<String>,
        factors: Vec<FactorSpec>,
        mode_map: Vec<(VariantId, FactorLevels)>,
    ) -> Result<Self, DesignError> {
        let title = title.into();
        let cells: usize = factors.iter().map(FactorSpec::level_count).product();
        if mode_map.len() != cells {
            return Err(DesignError::Malformed {
                line: 0,
                reason: format!(
                    "{title}: mode map has {} entries but the factorial has {cells} cells",
                    mode_map.len()
                ),
            });
        }
        let mut to_levels = BTreeMap::new();
        let mut to_variant = BTreeMap::new();
        for (id, levels) in &mode_map {
            check_levels(&title, &factors, levels)?;
            if to_levels.insert(*id, levels.clone()).is_some() {
                return Err(DesignError::Malformed {
                    line: 0,
                    reason: format!("{title}: variant {id} listed twice"),
                });
            }
            if to_variant.insert(levels.clone(), *id).is_some() {
                return Err(DesignError::Malformed {
                    line: 0,
                    reason: format!("{title}: levels {:?} listed twice", levels.0),
                });
            }
        }
        let variants = to_levels.keys().copied().collect();
        Ok(Self {
            title,
            factors,
            variants,
            to_levels,
            to_variant,
        })
    }

    /// Parses the two-section design data format described in the module docs.
    pub fn parse(text: &str) -> Result<Self, DesignError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let malformed = |line: usize, reason: &str| DesignError::Malformed {
            line,
            reason: reason.to_string(),
        };

        match lines.next() {
            Some((_, "title,factor,levels")) => {}
            Some((n, _)) => return Err(malformed(n, "expected header `title,factor,levels`")),
            None => return Err(malformed(1, "empty design file")),
        }
        let mut title: Option<String> = None;
        let mut factors = Vec::new();
        for (n, line) in lines.by_ref() {
            if line.is_empty() {
                break;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(malformed(n, "factor rows have three fields"));
            }
            match &title {
                Some(t) if t != fields[0] => return Err(malformed(n, "title changes mid-file")),
                None => title = Some(fields[0].to_string()),
                _ => {}
            }
            let levels = fields[2].split(';').map(str::to_string).collect();
            factors.push(
                FactorSpec::new(fields[1], levels).map_err(|e| malformed(n, &e.to_string()))?,
            );
        }
        let title = title.ok_or_else(|| malformed(2, "no factors declared"))?;

        let (n, header) = lines
            .next()
            .ok_or_else(|| malformed(0, "missing mode map section"))?;
        let header: Vec<&str> = header.split(',').collect();
        if header.len() != factors.len() + 2
            || header[0] != "difficulty_bit"
            || header[1] != "mode_code"
            || header[2..].iter().zip(&factors).any(|(h, f)| *h != f.name)
        {
            return Err(malformed(n, "mode map header does not match the declared factors"));
        }
        let mut mode_map = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(malformed(n, "wrong field count in mode map row"));
            }
            let bit: u8 = fields[0]
                .parse()
                .map_err(|_| malformed(n, "difficulty_bit must be 0 or 1"))?;
            if bit > 1 {
                return Err(malformed(n, "difficulty_bit must be 0 or 1"));
            }
            let mode: u16 = fields[1]
                .parse()
                .map_err(|_| malformed(n, "mode_code must be a non-negative integer"))?;
            let levels = fields[2..]
                .iter()
                .zip(&factors)
                .map(|(label, factor)| {
                    factor
                        .levels
                        .iter()
                        .position(|l| l == label)
                        .ok_or_else(|| malformed(n, &format!("unknown level `{label}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            mode_map.push((VariantId::new(bit, mode), FactorLevels(levels)));
        }
        Self::new(title, factors, mode_map)
    }

    /// Serializes back to the data-file layout, in canonical variant order.
    pub fn to_data_text(&self) -> String {
        let mut out = String::from("title,factor,levels\n");
        for f in &self.factors {
            out.push_str(&format!("{},{},{}\n", self.title, f.name, f.levels.join(";")));
        }
        out.push_str("\ndifficulty_bit,mode_code,");
        out.push_str(
            &self
                .factors
                .iter()
                .map(|f| f.name.as_str())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for id in &self.variants {
            let levels = &self.to_levels[id];
            let labels: Vec<&str> = levels
                .0
                .iter()
                .zip(&self.factors)
                .map(|(&l, f)| f.levels[l].as_str())
                .collect();
            out.push_str(&format!(
                "{},{},{}\n",
                id.difficulty_bit,
                id.mode_code,
                labels.join(",")
            ));
        }
        out
    }

    pub fn variant_count(&self) -> usize {
        self.variants.len()
    }

    pub fn contains(&self, id: VariantId) -> bool {
        self.to_levels.contains_key(&id)
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    /// Returns the same design with its factors reordered (`order[i]` is the
    /// old index of the new i-th factor).
    pub fn with_factor_order(&self, order: &[usize]) -> Result<Self, DesignError> {
        let mut seen = vec![false; self.factors.len()];
        if order.len() != self.factors.len()
            || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true))
        {
            return Err(DesignError::Malformed {
                line: 0,
                reason: format!("{order:?} is not a permutation of the factors"),
            });
        }
        let factors = order.iter().map(|&i| self.factors[i].clone()).collect();
        let mode_map = self
            .to_levels
            .iter()
            .map(|(id, lv)| (*id, FactorLevels(order.iter().map(|&i| lv.0[i]).collect())))
            .collect();
        Self::new(self.title.clone(), factors, mode_map)
    }
}

fn check_levels(
    title: &str,
    factors: &[FactorSpec],
    levels: &FactorLevels,
) -> Result<(), DesignError> {
    let invalid = |reason: String| DesignError::InvalidLevels {
        title: title.to_string(),
        levels: levels.0.clone(),
        reason,
    };
    if levels.0.len() != factors.len() {
        return Err(invalid(format!(
            "expected {} level indices, got {}",
            factors.len(),
            levels.0.len()
        )));
    }
    for (&l, f) in levels.0.iter().zip(factors) {
        if l >= f.level_count() {
            return Err(invalid(format!(
                "level {l} out of range for `{}` ({} levels)",
                f.name,
                f.level_count()
            )));
        }
    }
    Ok(())
}

/// Loads one of the bundled designs.
pub fn load_design(title: &str) -> Result<FactorialDesign, DesignError> {
    let text = bundled::design_text(title).ok_or_else(|| DesignError::UnknownTitle(title.into()))?;
    FactorialDesign::parse(text)
}

pub fn decode_variant(design: &FactorialDesign, id: VariantId) -> Result<FactorLevels, DesignError> {
    design
        .to_levels
        .get(&id)
        .cloned()
        .ok_or_else(|| DesignError::InvalidVariant {
            title: design.title.clone(),
            id,
        })
}

pub fn encode_variant(
    design: &FactorialDesign,
    levels: &FactorLevels,
) -> Result<VariantId, DesignError> {
    check_levels(&design.title, &design.factors, levels)?;
    Ok(design.to_variant[levels])
}

/// All variants, difficulty-major then mode-ascending.
pub fn enumerate_variants(design: &FactorialDesign) -> Vec<VariantId> {
    design.variants.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectKind {
    Intercept,
    Main,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectBlock {
    pub name: String,
    pub kind: EffectKind,
    pub columns: Range<usize>,
    /// Factor index for main effects.
    pub factor: Option<usize>,
}

impl EffectBlock {
    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coding {
    /// Deviation coding: level j < L-1 maps to the unit vector e_j, the last
    /// level maps to all -1.
    SumToZero,
    Treatment,
}

/// Model matrix for a factorial linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub effect_blocks: Vec<EffectBlock>,
    pub coding: Coding,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn block(&self, name: &str) -> Option<&EffectBlock> {
        self.effect_blocks.iter().find(|b| b.name == name)
    }

    /// Copy of the matrix without the given column range.
    pub fn without_columns(&self, drop: &Range<usize>) -> DMatrix<f64> {
        let keep: Vec<usize> = (0..self.ncols()).filter(|c| !drop.contains(c)).collect();
        DMatrix::from_fn(self.nrows(), keep.len(), |r, c| self.x[(r, keep[c])])
    }
}

fn deviation_code(level: usize, levels: usize) -> Vec<f64> {
    (0..levels - 1)
        .map(|j| {
            if level == levels - 1 {
                -1.0
            } else if level == j {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Builds the sum-to-zero model matrix: intercept, `levels - 1` main-effect
/// columns per factor, then one lumped block holding every product of main
/// effect contrasts over factor subsets of size two or more.
pub fn build_model_matrix(
    design: &FactorialDesign,
    observations: &[(VariantId, f64)],
) -> Result<DesignMatrix, DesignError> {
    if observations.is_empty() {
        return Err(DesignError::NoObservations);
    }
    let k = design.factors.len();
    let counts: Vec<usize> = design.factors.iter().map(FactorSpec::level_count).collect();

    // Interaction terms: factor subsets of size >= 2, ordered by size then
    // lexicographically, each expanding to the product of its contrast columns.
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k))
        .filter(|m| m.count_ones() >= 2)
        .map(|m| (0..k).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));

    let mut column_names = vec!["Intercept".to_string()];
    let mut blocks = vec![EffectBlock {
        name: "Intercept".into(),
        kind: EffectKind::Intercept,
        columns: 0..1,
        factor: None,
    }];
    for (i, f) in design.factors.iter().enumerate() {
        let start = column_names.len();
        for lvl in &f.levels[..f.level_count() - 1] {
            column_names.push(format!("{}[{}]", f.name, lvl));
        }
        blocks.push(EffectBlock {
            name: f.name.clone(),
            kind: EffectKind::Main,
            columns: start..column_names.len(),
            factor: Some(i),
        });
    }
    let interaction_start = column_names.len();
    let mut interaction_terms: Vec<Vec<usize>> = Vec::new();
    for subset in &subsets {
        let mut combos: Vec<Vec<usize>> = vec![vec![]];
        for &f in subset {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    (0..counts[f] - 1).map(move |j| {
                        let mut c = c.clone();
                        c.push(j);
                        c
                    })
                })
                .collect();
        }
        for combo in combos {
            let name = subset
                .iter()
                .zip(&combo)
                .map(|(&f, &j)| format!("{}[{}]", design.factors[f].name, design.factors[f].levels[j]))
                .collect::<Vec<_>>()
                .join(":");
            column_names.push(name);
            let mut term = vec![usize::MAX; k];
            for (&f, &j) in subset.iter().zip(&combo) {
                term[f] = j;
            }
            interaction_terms.push(term);
        }
    }
    if !interaction_terms.is_empty() {
        blocks.push(EffectBlock {
            name: "Interaction".into(),
            kind: EffectKind::Interaction,
            columns: interaction_start..column_names.len(),
            factor: None,
        });
    }

    let ncols = column_names.len();
    let mut x = DMatrix::zeros(observations.len(), ncols);
    for (r, (id, _)) in observations.iter().enumerate() {
        let levels = decode_variant(design, *id)?;
        let codes: Vec<Vec<f64>> = levels
            .0
            .iter()
            .zip(&counts)
            .map(|(&l, &n)| deviation_code(l, n))
            .collect();
        x[(r, 0)] = 1.0;
        let mut c = 1;
        for code in &codes {
            for &v in code {
                x[(r, c)] = v;
                c += 1;
            }
        }
        for term in &interaction_terms {
            x[(r, c)] = term
                .iter()
                .enumerate()
                .filter(|(_, &j)| j != usize::MAX)
                .map(|(f, &j)| codes[f][j])
                .product();
            c += 1;
        }
    }
    Ok(DesignMatrix {
        x,
        column_names,
        effect_blocks: blocks,
        coding: Coding::SumToZero,
    })
}
