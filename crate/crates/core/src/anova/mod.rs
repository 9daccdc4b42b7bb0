//! Linear models, type-3 ANOVA with HC3 or classical covariance, Bonferroni
//! post-hoc decisions and residual diagnostics.

mod fdist;
mod ols;
mod posthoc;
mod qr;
mod table;

use thiserror::Error;

pub use fdist::{beta_reg, f_p_value, ln_beta, ln_gamma};
pub use ols::{classical_covariance, fit_ols, hc3_covariance, residual_quantiles, sandwich, LinearModelFit};
pub use posthoc::{
    bonferroni_alpha, marginal_level_comparisons, posthoc_factor_effects, Comparison, EffectDecision,
    PosthocResult,
};
pub use qr::{HouseholderQr, RANK_TOL};
pub use table::{format_sci, type3_anova, AnovaRow, AnovaTable, CovarianceKind, RowKind};

#[derive(Debug, Error, PartialEq)]
pub enum AnovaError {
    #[error("{rows} observations for {cols} columns")]
    DimensionMismatch { rows: usize, cols: usize },
    #[error("rank-deficient model matrix; dependent columns: {}", .names.join(", "))]
    RankDeficient { columns: Vec<usize>, names: Vec<String> },
    #[error("exact fit: no residual degrees of freedom")]
    ExactFit,
    #[error("non-finite response value at observation {0}")]
    NonFinite(usize),
    #[error("observation {0} has leverage 1 and determines its own fit")]
    LeverageOne(usize),
    #[error("type-3 sums of squares need sum-to-zero coding")]
    NotSumToZero,
    #[error("invalid degrees of freedom ({df1}, {df2})")]
    InvalidDf { df1: usize, df2: usize },
    #[error("invalid F statistic {0}")]
    InvalidStatistic(f64),
    #[error("residual variance is zero")]
    ZeroVariance,
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
}
