//! Householder QR for tall, full-column-rank least-squares problems.

use nalgebra::{DMatrix, DVector};

/// Relative residual norm below which a column counts as dependent on the
/// columns before it.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct HouseholderQr {
    /// Upper triangle holds R; reflectors are kept separately.
    r: DMatrix<f64>,
    /// Unit reflector vectors, `vs[k]` acting on rows `k..n`.
    vs: Vec<DVector<f64>>,
    nrows: usize,
}

impl HouseholderQr {
    /// Factors `x`, or returns the indices of columns lying (numerically) in
    /// the span of their predecessors.
    pub fn new(x: &DMatrix<f64>) -> Result<Self, Vec<usize>> {
        let (n, p) = x.shape();
        let mut a = x.clone();
        let mut vs = Vec::with_capacity(p);
        let mut dependent = Vec::new();
        for j in 0..p {
            let k = vs.len();
            let original = x.column(j).norm();
            let tail = a.view((k, j), (n - k, 1)).norm();
            if k >= n || tail <= RANK_TOL * original.max(f64::MIN_POSITIVE) || original == 0.0 {
                dependent.push(j);
                continue;
            }
            let mut v: DVector<f64> = a.view((k, j), (n - k, 1)).column(0).into_owned();
            let alpha = if v[0] >= 0.0 { -tail } else { tail };
            v[0] -= alpha;
            let vn = v.norm();
            v /= vn;
            for c in j..p {
                let mut col = a.view_mut((k, c), (n - k, 1));
                let dot = v.dot(&col);
                col.column_mut(0).axpy(-2.0 * dot, &v, 1.0);
            }
            vs.push(v);
        }
        if !dependent.is_empty() {
            return Err(dependent);
        }
        let r = a.rows(0, p).upper_triangle();
        Ok(Self { r, vs, nrows: n })
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Qᵀ y.
    pub fn qt_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = y.clone();
        for (k, v) in self.vs.iter().enumerate() {
            let mut tail = out.rows_mut(k, self.nrows - k);
            let dot = v.dot(&tail);
            tail.axpy(-2.0 * dot, v, 1.0);
        }
        out
    }

    /// Least-squares solution of `x b = y`.
    pub fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let p = self.r.ncols();
        let qty = self.qt_mul(y);
        let mut b = qty.rows(0, p).into_owned();
        for i in (0..p).rev() {
            let mut s = b[i];
            for j in i + 1..p {
                s -= self.r[(i, j)] * b[j];
            }
            b[i] = s / self.r[(i, i)];
        }
        b
    }

    /// R⁻¹ by back substitution.
    pub fn r_inverse(&self) -> DMatrix<f64> {
        let p = self.r.ncols();
        let mut inv = DMatrix::zeros(p, p);
        for c in 0..p {
            for i in (0..=c).rev() {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for j in i + 1..=c {
                    s -= self.r[(i, j)] * inv[(j, c)];
                }
                inv[(i, c)] = s / self.r[(i, i)];
            }
        }
        inv
    }

    /// (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ.
    pub fn xtx_inverse(&self) -> DMatrix<f64> {
        let ri = self.r_inverse();
        &ri * ri.transpose()
    }

    /// First `p` columns of Q.
    pub fn thin_q(&self) -> DMatrix<f64> {
        let p = self.r.ncols();
        let mut q = DMatrix::zeros(self.nrows, p);
        for c in 0..p {
            let mut e = DVector::zeros(self.nrows);
            e[c] = 1.0;
            for (k, v) in self.vs.iter().enumerate().rev() {
                let mut tail = e.rows_mut(k, self.nrows - k);
                let dot = v.dot(&tail);
                tail.axpy(-2.0 * dot, v, 1.0);
            }
            q.set_column(c, &e);
        }
        q
    }
}
