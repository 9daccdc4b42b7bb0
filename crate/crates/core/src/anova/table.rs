use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fdist::f_p_value;
use super::ols::{classical_covariance, fit_ols, hc3_covariance, LinearModelFit};
use super::AnovaError;
use crate::design::{Coding, DesignMatrix, EffectKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Classical,
    Hc3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Intercept,
    Main,
    Interaction,
    Residual,
}

impl From<EffectKind> for RowKind {
    fn from(k: EffectKind) -> Self {
        match k {
            EffectKind::Intercept => RowKind::Intercept,
            EffectKind::Main => RowKind::Main,
            EffectKind::Interaction => RowKind::Interaction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub effect: String,
    pub kind: RowKind,
    pub sum_sq: f64,
    pub df: usize,
    /// Absent on the residual row.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub covariance: CovarianceKind,
    pub residual_df: usize,
    pub warnings: Vec<String>,
}

impl AnovaTable {
    pub fn row(&self, effect: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.effect == effect)
    }

    pub fn residual(&self) -> &AnovaRow {
        self.rows.last().expect("residual row")
    }

    /// df column in row order, residual last.
    pub fn df_column(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.df).collect()
    }

    /// Sum-of-squares ratio (sum_sq / df) / (rss / residual_df) for an effect.
    pub fn ss_ratio(&self, effect: &str) -> Option<f64> {
        let row = self.row(effect)?;
        let res = self.residual();
        if row.kind == RowKind::Residual {
            return None;
        }
        Some((row.sum_sq / row.df as f64) / (res.sum_sq / res.df as f64))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("effect,sum_sq,df,F,p\n");
        for r in &self.rows {
            let f = r.f.map(|v| format!("{v}")).unwrap_or_default();
            let p = r.p.map(format_sci).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", csv_field(&r.effect), r.sum_sq, r.df, f, p);
        }
        out
    }

    /// Fixed-width layout: intercept, main effects, interaction and residual
    /// separated by rules.
    pub fn to_text(&self, title: &str) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.effect.len())
            .chain([title.len(), 9])
            .max()
            .unwrap_or(9);
        let mut out = String::new();
        let header = format!(
            "{:<width$}  {:>10}  {:>4}  {:>12}  {:>10}",
            title, "sum_sq", "df", "F", "PR(>F)"
        );
        let rule = "-".repeat(header.len());
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{rule}");
        let mut prev: Option<RowKind> = None;
        for r in &self.rows {
            if let Some(k) = prev {
                if k != r.kind || r.kind == RowKind::Interaction {
                    let _ = writeln!(out, "{rule}");
                }
            }
            prev = Some(r.kind);
            let f = r.f.map(|v| format!("{v:.2}")).unwrap_or_default();
            let p = r.p.map(format_sci).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>4}  {:>12}  {:>10}",
                r.effect,
                format_sum_sq(r.sum_sq),
                r.df,
                f,
                p
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Scientific notation with a two-digit mantissa fraction and signed
/// two-digit exponent, e.g. `5.32e-16`, `8.18e+07`.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.2e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn format_sum_sq(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(0.01..1e5).contains(&a) {
        format_sci(x)
    } else {
        format!("{x:.2}")
    }
}

/// Wald F for `H0: β[cols] = 0`; a singular block covariance gives F = ∞
/// unless the block is exactly zero.
fn wald_f(beta: &DVector<f64>, v: &DMatrix<f64>, cols: &std::ops::Range<usize>) -> (f64, bool) {
    let q = cols.len();
    let b = beta.rows(cols.start, q).into_owned();
    let vbb = v.view((cols.start, cols.start), (q, q)).into_owned();
    let scale = vbb.diagonal().amax();
    if scale > 0.0 {
        if let Some(ch) = Cholesky::new(vbb.clone()) {
            let x = ch.solve(&b);
            let stat = b.dot(&x) / q as f64;
            let min_pivot = ch.l().diagonal().iter().fold(f64::INFINITY, |m, d| m.min(d * d));
            if min_pivot > 1e-14 * scale {
                return (stat.max(0.0), false);
            }
        }
    }
    if b.amax() == 0.0 {
        (0.0, true)
    } else {
        (f64::INFINITY, true)
    }
}

fn degenerate_cells(x: &DMatrix<f64>, y: &[f64]) -> usize {
    let mut cells: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    for (i, yi) in y.iter().enumerate() {
        let key = x.row(i).iter().map(|v| v.to_bits()).collect();
        cells.entry(key).or_default().push(*yi);
    }
    cells
        .values()
        .filter(|v| v.len() > 1 && v.iter().all(|s| *s == v[0]))
        .count()
}

/// Type-3 ANOVA: each block's sum of squares is the RSS increase from
/// dropping it; F is the Wald statistic under the chosen covariance.
pub fn type3_anova(dm: &DesignMatrix, y: &[f64], robust: bool) -> Result<AnovaTable, AnovaError> {
    if dm.coding != Coding::SumToZero {
        return Err(AnovaError::NotSumToZero);
    }
    let fit = fit_ols(&dm.x, y).map_err(|e| match e {
        AnovaError::RankDeficient { columns, .. } => AnovaError::RankDeficient {
            names: columns.iter().map(|c| dm.column_names[*c].clone()).collect(),
            columns,
        },
        e => e,
    })?;
    type3_from_fit(dm, y, &fit, robust)
}

pub(crate) fn type3_from_fit(
    dm: &DesignMatrix,
    y: &[f64],
    fit: &LinearModelFit,
    robust: bool,
) -> Result<AnovaTable, AnovaError> {
    let mut warnings = Vec::new();
    let (v, covariance) = if robust {
        (hc3_covariance(fit, &dm.x)?, CovarianceKind::Hc3)
    } else {
        let cells = degenerate_cells(&dm.x, y);
        if cells > 0 {
            warnings.push(format!("{cells} cells have zero within-cell variance"));
        }
        (classical_covariance(fit), CovarianceKind::Classical)
    };
    let mut rows = Vec::with_capacity(dm.effect_blocks.len() + 1);
    for block in &dm.effect_blocks {
        let reduced = dm.without_columns(&block.columns);
        let rss_reduced = if reduced.ncols() == 0 {
            y.iter().map(|v| v * v).sum()
        } else {
            fit_ols(&reduced, y)?.rss
        };
        let (f, singular) = wald_f(&fit.coefficients, &v, &block.columns);
        if singular {
            warnings.push(format!("{}: singular covariance block, F = {f}", block.name));
        }
        rows.push(AnovaRow {
            effect: block.name.clone(),
            kind: block.kind.into(),
            sum_sq: (rss_reduced - fit.rss).max(0.0),
            df: block.width(),
            f: Some(f),
            p: Some(f_p_value(f, block.width(), fit.residual_df)?),
        });
    }
    rows.push(AnovaRow {
        effect: "Residual".into(),
        kind: RowKind::Residual,
        sum_sq: fit.rss,
        df: fit.residual_df,
        f: None,
        p: None,
    });
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(AnovaTable {
        rows,
        covariance,
        residual_df: fit.residual_df,
        warnings,
    })
}
