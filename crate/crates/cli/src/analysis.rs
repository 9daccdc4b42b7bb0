//! Analysis pipelines shared by several subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use curricula_core::anova::{
    classical_covariance, fit_ols, format_sci, hc3_covariance, marginal_level_comparisons, posthoc_factor_effects,
    residual_quantiles, type3_anova, AnovaTable, PosthocResult,
};
use curricula_core::bundled::{published_grid, published_table, Table};
use curricula_core::design::{build_model_matrix, enumerate_variants, FactorialDesign, VariantId};
use curricula_core::scores::{strategy_eval, ScoreError, ScoreTable, Strategy, StrategySummary, TransferMatrix};

use crate::error::{CliError, CliResult};

/// Observation counts per design cell, and whether the layout supports the
/// classical analysis: every cell present with the same count, at least 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Balance {
    pub counts: BTreeMap<VariantId, usize>,
    pub balanced: bool,
    pub message: Option<String>,
}

pub fn balance(design: &FactorialDesign, observations: &[(VariantId, f64)]) -> Balance {
    let mut counts: BTreeMap<VariantId, usize> = enumerate_variants(design).into_iter().map(|v| (v, 0)).collect();
    for (v, _) in observations {
        *counts.entry(*v).or_default() += 1;
    }
    let min = counts.values().copied().min().unwrap_or(0);
    let max = counts.values().copied().max().unwrap_or(0);
    let message = if min != max {
        Some(format!("unbalanced data: {min} to {max} observations per cell"))
    } else if min < 3 {
        Some(format!("{min} observations per cell; at least 3 expected"))
    } else {
        None
    };
    Balance {
        balanced: message.is_none(),
        counts,
        message,
    }
}

#[derive(Debug, Clone)]
pub struct AnovaReport {
    pub title: String,
    pub table: AnovaTable,
    pub posthoc: PosthocResult,
    pub k: usize,
    pub alpha: f64,
    pub quantiles: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Type-3 ANOVA with Bonferroni post-hoc decisions over `k` = number of
/// design cells, pairwise marginal comparisons for every factor, and the
/// residual quantiles of the full model.
pub fn anova_report(
    design: &FactorialDesign,
    observations: &[(VariantId, f64)],
    robust: bool,
    alpha: f64,
) -> CliResult<AnovaReport> {
    let bal = balance(design, observations);
    let mut warnings = Vec::new();
    if let Some(msg) = &bal.message {
        if !robust && bal.counts.values().min() != bal.counts.values().max() {
            return Err(CliError::Data(format!("{msg}; classical covariance needs balanced data")));
        }
        log::warn!("{}: {msg}", design.title);
        warnings.push(msg.clone());
    }
    let dm = build_model_matrix(design, observations)?;
    let y: Vec<f64> = observations.iter().map(|o| o.1).collect();
    let table = type3_anova(&dm, &y, robust)?;
    warnings.extend(table.warnings.iter().cloned());
    let fit = fit_ols(&dm.x, &y)?;
    let cov = if robust {
        hc3_covariance(&fit, &dm.x)?
    } else {
        classical_covariance(&fit)
    };
    let k = design.variant_count();
    let mut posthoc = posthoc_factor_effects(&table, alpha, k);
    for f in &design.factors {
        posthoc.comparisons.extend(marginal_level_comparisons(
            design,
            &dm,
            &fit.coefficients,
            &cov,
            fit.residual_df,
            &f.name,
            posthoc.corrected_alpha,
        )?);
    }
    let quantiles = residual_quantiles(&fit)?;
    Ok(AnovaReport {
        title: design.title.clone(),
        table,
        posthoc,
        k,
        alpha,
        quantiles,
        warnings,
    })
}

impl AnovaReport {
    pub fn bonferroni_line(&self) -> String {
        format!(
            "Bonferroni-corrected alpha = {} / {} -> {}",
            self.alpha,
            self.k,
            self.posthoc.corrected_alpha
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = self.table.to_text(&self.title);
        let _ = writeln!(out, "covariance: {:?}", self.table.covariance);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "\npost-hoc\n{}", self.bonferroni_line());
        for e in &self.posthoc.factor_effects {
            let _ = writeln!(
                out,
                "  {:<24} p = {:>9}  {}",
                e.effect,
                format_sci(e.p),
                if e.significant { "significant" } else { "not significant" }
            );
        }
        let _ = writeln!(out, "\npairwise level comparisons");
        for c in &self.posthoc.comparisons {
            let _ = writeln!(
                out,
                "  {}: {} - {} = {:.4}  p = {}{}",
                c.factor,
                c.group_a,
                c.group_b,
                c.mean_difference,
                format_sci(c.p),
                if c.significant { "  *" } else { "" }
            );
        }
        out
    }

    pub fn posthoc_csv(&self) -> String {
        let mut out = String::from("factor,group_a,group_b,mean_difference,p,significant,corrected_alpha\n");
        for c in &self.posthoc.comparisons {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.factor,
                c.group_a,
                c.group_b,
                c.mean_difference,
                format_sci(c.p),
                c.significant,
                self.posthoc.corrected_alpha
            );
        }
        out
    }

    pub fn quantiles_csv(&self) -> String {
        let mut out = String::from("theoretical,standardized_residual\n");
        for (q, r) in &self.quantiles {
            let _ = writeln!(out, "{q},{r}");
        }
        out
    }
}

/// Divides every observation by the expert mean of its variant, times 100.
pub fn normalize_observations(
    observations: &[(VariantId, f64)],
    expert: &ScoreTable,
) -> CliResult<Vec<(VariantId, f64)>> {
    observations
        .iter()
        .map(|(v, x)| {
            let e = expert.mean(*v).ok_or(ScoreError::MissingExpert(*v))?;
            Ok((*v, curricula_core::scores::normalize_score(*x, e)?))
        })
        .collect()
}

/// Every strategy that can be evaluated on the matrix; the others are
/// reported as warnings.
pub fn strategy_summaries(matrix: &TransferMatrix) -> (Vec<StrategySummary>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for s in Strategy::ALL {
        match strategy_eval(matrix, s) {
            Ok(sum) => out.push(sum),
            Err(e) => {
                log::warn!("strategy {s}: {e}");
                warnings.push(format!("strategy {s}: {e}"));
            }
        }
    }
    (out, warnings)
}

pub fn strategies_csv(summaries: &[StrategySummary]) -> String {
    let mut out = String::from("strategy,median,lower_quartile,upper_quartile,targets\n");
    for s in summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.strategy,
            s.median,
            s.lower_quartile,
            s.upper_quartile,
            s.per_target.len()
        );
    }
    out
}

pub fn per_target_csv(summaries: &[StrategySummary]) -> String {
    let mut targets: Vec<VariantId> = summaries.iter().flat_map(|s| s.per_target.keys().copied()).collect();
    targets.sort();
    targets.dedup();
    let mut out = String::from("target");
    for s in summaries {
        let _ = write!(out, ",{}", s.strategy);
    }
    out.push('\n');
    for t in targets {
        out.push_str(&t.to_string());
        for s in summaries {
            match s.per_target.get(&t) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push_str(",n/a"),
            }
        }
        out.push('\n');
    }
    out
}

/// Published normalized cell against `100 * raw / expert`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub table: &'static str,
    pub target: VariantId,
    /// `None` for per-variant tables.
    pub source: Option<VariantId>,
    pub published: f64,
    pub recomputed: f64,
}

impl Deviation {
    pub fn difference(&self) -> f64 {
        self.recomputed - self.published
    }

    /// `|difference| <= tolerance`, with 1e-9 slack for binary rounding.
    pub fn within(&self, tolerance: f64) -> bool {
        self.difference().abs() <= tolerance + 1e-9
    }
}

/// Every cell of the bundled tables where both the raw score and the
/// published normalized value are defined.
pub fn normalization_deviations(title: &str) -> CliResult<Vec<Deviation>> {
    let expert = published_table(title, Table::Expert)?;
    let expert_of = |v: VariantId| expert.mean(v).ok_or(ScoreError::MissingExpert(v));
    let mut out = Vec::new();
    for (raw_t, norm_t) in [
        (Table::Scratch, Table::ScratchNormalized),
        (Table::ZeroShotDefault, Table::ZeroShotDefaultNormalized),
        (Table::FinetunedDefault, Table::FinetunedDefaultNormalized),
    ] {
        let raw = published_table(title, raw_t)?;
        let norm = published_table(title, norm_t)?;
        for (v, scores) in norm.iter() {
            if let (Some(p), Some(r)) = (scores.first(), raw.mean(v)) {
                out.push(Deviation {
                    table: norm_t.file_stem(),
                    target: v,
                    source: None,
                    published: *p,
                    recomputed: 100.0 * r / expert_of(v)?,
                });
            }
        }
    }
    let raw = published_grid(title, Table::TransferRaw)?;
    let norm = published_grid(title, Table::TransferNormalized)?;
    for (i, t) in norm.targets.iter().enumerate() {
        for (j, s) in norm.sources.iter().enumerate() {
            if let (Some(p), Some(r)) = (norm.cells[i][j], raw.get(*t, *s)) {
                out.push(Deviation {
                    table: Table::TransferNormalized.file_stem(),
                    target: *t,
                    source: Some(*s),
                    published: p,
                    recomputed: 100.0 * r / expert_of(*t)?,
                });
            }
        }
    }
    Ok(out)
}

pub fn deviations_csv(devs: &[Deviation], tolerance: f64) -> String {
    let mut out = String::from("table,target,source,published,recomputed,difference,within_tolerance\n");
    for d in devs {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{}",
            d.table,
            d.target,
            d.source.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            d.published,
            d.recomputed,
            d.difference(),
            d.within(tolerance)
        );
    }
    out
}
