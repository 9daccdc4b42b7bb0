use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fdist::f_p_value;
use super::table::{AnovaTable, CovarianceKind, RowKind};
use super::AnovaError;
use crate::design::{DesignMatrix, FactorialDesign};

/// `alpha / k` truncated to four decimals. Falls back to the exact ratio
/// when truncation would leave zero.
pub fn bonferroni_alpha(alpha: f64, k: usize) -> f64 {
    let k = k.max(1) as f64;
    let exact = alpha / k;
    let truncated = (exact * 1e4 + 1e-9).floor() / 1e4;
    if truncated > 0.0 {
        truncated
    } else {
        exact
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectDecision {
    pub effect: String,
    pub p: f64,
    pub significant: bool,
}

/// Pairwise difference between two levels of a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub factor: String,
    pub group_a: String,
    pub group_b: String,
    pub mean_difference: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocResult {
    pub corrected_alpha: f64,
    pub factor_effects: Vec<EffectDecision>,
    pub comparisons: Vec<Comparison>,
}

/// Flags each main effect whose p-value is below the corrected alpha.
pub fn posthoc_factor_effects(table: &AnovaTable, alpha: f64, k: usize) -> PosthocResult {
    if table.covariance != CovarianceKind::Hc3 {
        log::warn!("post-hoc decisions on a classical-covariance table");
    }
    let corrected_alpha = bonferroni_alpha(alpha, k);
    let factor_effects = table
        .rows
        .iter()
        .filter(|r| r.kind == RowKind::Main)
        .map(|r| {
            let p = r.p.unwrap_or(1.0);
            EffectDecision {
                effect: r.effect.clone(),
                p,
                significant: p < corrected_alpha,
            }
        })
        .collect();
    PosthocResult {
        corrected_alpha,
        factor_effects,
        comparisons: Vec::new(),
    }
}

/// Wald tests of every pair of marginal level effects of one factor,
/// `F(1, residual_df)` on the contrast `α_a − α_b` with `α_last = −Σβ`.
pub fn marginal_level_comparisons(
    design: &FactorialDesign,
    dm: &DesignMatrix,
    coefficients: &DVector<f64>,
    covariance: &DMatrix<f64>,
    residual_df: usize,
    factor: &str,
    corrected_alpha: f64,
) -> Result<Vec<Comparison>, AnovaError> {
    let fi = design
        .factor_index(factor)
        .ok_or_else(|| AnovaError::UnknownFactor(factor.to_string()))?;
    let block = dm
        .effect_blocks
        .iter()
        .find(|b| b.factor == Some(fi))
        .ok_or_else(|| AnovaError::UnknownFactor(factor.to_string()))?;
    let spec = &design.factors[fi];
    let levels = spec.level_count();
    let code = |lvl: usize| -> DVector<f64> {
        let mut c = DVector::zeros(dm.ncols());
        for j in 0..levels - 1 {
            c[block.columns.start + j] = if lvl == levels - 1 {
                -1.0
            } else if lvl == j {
                1.0
            } else {
                0.0
            };
        }
        c
    };
    let mut out = Vec::new();
    for a in 0..levels {
        for b in a + 1..levels {
            let d = code(a) - code(b);
            let diff = d.dot(coefficients);
            let var = (d.transpose() * covariance * &d)[(0, 0)];
            let f = if var > 0.0 {
                diff * diff / var
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let p = f_p_value(f, 1, residual_df)?;
            out.push(Comparison {
                factor: spec.name.clone(),
                group_a: spec.levels[a].clone(),
                group_b: spec.levels[b].clone(),
                mean_difference: diff,
                p,
                significant: p < corrected_alpha,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anova::table::AnovaRow;

    #[test]
    fn thresholds() {
        assert_eq!(bonferroni_alpha(0.05, 32), 0.0015);
        assert_eq!(bonferroni_alpha(0.05, 24), 0.0020);
        assert_eq!(bonferroni_alpha(0.05, 16), 0.0031);
        assert_eq!(bonferroni_alpha(0.05, 1), 0.05);
        assert_eq!(bonferroni_alpha(0.001, 32), 0.001 / 32.0);
    }

    fn table(ps: &[(&str, f64)]) -> AnovaTable {
        let mut rows: Vec<AnovaRow> = ps
            .iter()
            .map(|(e, p)| AnovaRow {
                effect: e.to_string(),
                kind: RowKind::Main,
                sum_sq: 1.0,
                df: 1,
                f: Some(1.0),
                p: Some(*p),
            })
            .collect();
        rows.push(AnovaRow {
            effect: "Residual".into(),
            kind: RowKind::Residual,
            sum_sq: 1.0,
            df: 32,
            f: None,
            p: None,
        });
        AnovaTable {
            rows,
            covariance: CovarianceKind::Hc3,
            residual_df: 32,
            warnings: vec![],
        }
    }

    #[test]
    fn decisions_follow_threshold() {
        let t = table(&[("Difficulty", 2.46e-1), ("Traffic", 2.73e-26), ("Speeds", 0.0)]);
        let r = posthoc_factor_effects(&t, 0.05, 16);
        assert_eq!(r.corrected_alpha, 0.0031);
        let sig: Vec<bool> = r.factor_effects.iter().map(|d| d.significant).collect();
        assert_eq!(sig, vec![false, true, true]);
        let t = table(&[("Zigzagging Bombs", 1.32e-2)]);
        assert!(!posthoc_factor_effects(&t, 0.05, 32).factor_effects[0].significant);
    }
}
