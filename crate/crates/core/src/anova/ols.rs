use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use super::qr::HouseholderQr;
use super::AnovaError;

/// Leverage at or above this is treated as 1.
const LEVERAGE_ONE: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelFit {
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Diagonal of the hat matrix.
    pub leverage: DVector<f64>,
    pub residual_df: usize,
    pub rss: f64,
    pub rank: usize,
    /// (XᵀX)⁻¹.
    pub xtx_inv: DMatrix<f64>,
}

impl LinearModelFit {
    pub fn nobs(&self) -> usize {
        self.residuals.len()
    }

    /// rss / residual_df.
    pub fn sigma2(&self) -> f64 {
        self.rss / self.residual_df as f64
    }
}

/// Ordinary least squares via Householder QR.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModelFit, AnovaError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(AnovaError::DimensionMismatch { rows: y.len(), cols: p });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(AnovaError::NonFinite(i));
    }
    let qr = HouseholderQr::new(x).map_err(|columns| AnovaError::RankDeficient {
        names: columns.iter().map(|c| format!("column {c}")).collect(),
        columns,
    })?;
    if n == p {
        return Err(AnovaError::ExactFit);
    }
    let y = DVector::from_column_slice(y);
    let coefficients = qr.solve(&y);
    let fitted = x * &coefficients;
    let residuals = &y - &fitted;
    let q = qr.thin_q();
    let leverage = DVector::from_fn(n, |i, _| q.row(i).norm_squared());
    Ok(LinearModelFit {
        rss: residuals.norm_squared(),
        coefficients,
        fitted,
        residuals,
        leverage,
        residual_df: n - p,
        rank: p,
        xtx_inv: qr.xtx_inverse(),
    })
}

/// `A Xᵀ diag(w) X A` with `A = (XᵀX)⁻¹`, symmetrized.
pub fn sandwich(xtx_inv: &DMatrix<f64>, x: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut wx = x.clone();
    for (i, w) in weights.iter().enumerate() {
        wx.row_mut(i).scale_mut(*w);
    }
    let meat = x.transpose() * wx;
    let v = xtx_inv * meat * xtx_inv;
    (&v + v.transpose()) * 0.5
}

/// HC3 covariance of the coefficients.
pub fn hc3_covariance(fit: &LinearModelFit, x: &DMatrix<f64>) -> Result<DMatrix<f64>, AnovaError> {
    if let Some(i) = fit.leverage.iter().position(|h| *h >= LEVERAGE_ONE) {
        return Err(AnovaError::LeverageOne(i));
    }
    let weights: Vec<f64> = fit
        .residuals
        .iter()
        .zip(fit.leverage.iter())
        .map(|(e, h)| (e / (1.0 - h)).powi(2))
        .collect();
    Ok(sandwich(&fit.xtx_inv, x, &weights))
}

/// σ̂² (XᵀX)⁻¹.
pub fn classical_covariance(fit: &LinearModelFit) -> DMatrix<f64> {
    &fit.xtx_inv * fit.sigma2()
}

/// Sorted standardized residuals paired with normal quantiles at `(i - 0.5) / n`.
pub fn residual_quantiles(fit: &LinearModelFit) -> Result<Vec<(f64, f64)>, AnovaError> {
    if fit.residual_df == 0 {
        return Err(AnovaError::ExactFit);
    }
    let scale = fit.sigma2().sqrt();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(AnovaError::ZeroVariance);
    }
    let mut z: Vec<f64> = fit.residuals.iter().map(|e| e / scale).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let n = z.len() as f64;
    Ok(z
        .into_iter()
        .enumerate()
        .map(|(i, r)| (normal.inverse_cdf((i as f64 + 0.5) / n), r))
        .collect())
}
