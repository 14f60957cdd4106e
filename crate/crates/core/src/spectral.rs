//! Dense matrices, thin SVD and the error metrics shared by every estimator.
//!
//! A [`SpectralDecomposition`] always carries `m = min(N, P)` components with
//! singular values sorted in decreasing order. Estimators work on the singular
//! values alone and hand the shrunk values back to [`reconstruct`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are set to zero.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-12;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 0;

/// Dense real matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::validation(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::validation(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite entry at row {}, column {}",
                pos / cols + 1,
                pos % cols + 1
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Column means, used for optional centering before denoising.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= self.rows as f64);
        means
    }

    /// Adds `offsets[j]` to every entry of column `j`.
    pub fn add_to_columns(&self, offsets: &[f64]) -> Self {
        assert_eq!(offsets.len(), self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, o) in out.data[i * self.cols..(i + 1) * self.cols]
                .iter_mut()
                .zip(offsets)
            {
                *v += o;
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::validation(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// Thin SVD `X = U diag(lambdas) V^T` with `m = min(N, P)` components.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    lambdas: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl SpectralDecomposition {
    /// Left singular vectors, `N x m`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Right singular vectors, `P x m`.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_components(&self) -> usize {
        self.lambdas.len()
    }

    /// `u_i^T W v_i` for every component: the projection of another matrix on
    /// the empirical singular directions. Lets the loss of any shrinker be
    /// evaluated without rebuilding the estimate.
    pub fn project(&self, w: &RealMatrix) -> Result<Vec<f64>> {
        if w.shape() != (self.n_rows, self.n_cols) {
            return Err(Error::validation(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.n_rows,
                self.n_cols,
                w.rows(),
                w.cols()
            )));
        }
        let wv = w.to_dmatrix() * &self.v;
        Ok((0..self.n_components())
            .map(|k| self.u.column(k).dot(&wv.column(k)))
            .collect())
    }
}

/// Thin SVD of `x`, with a deterministic sign convention: the entry of largest
/// magnitude in every left singular vector is nonnegative.
pub fn decompose(x: &RealMatrix) -> Result<SpectralDecomposition> {
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("matrix contains non-finite entries"));
    }
    let (n, p) = x.shape();
    // Golub-Kahan runs faster on the tall orientation.
    let transposed = n < p;
    let mat = if transposed {
        DMatrix::from_fn(p, n, |i, j| x.get(j, i))
    } else {
        x.to_dmatrix()
    };
    let svd = nalgebra::linalg::SVD::try_new(mat, true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::Computation("SVD did not converge".into()))?;
    let (Some(left), Some(right_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Computation("SVD returned no singular vectors".into()));
    };
    let (u_raw, v_raw) = if transposed {
        (right_t.transpose(), left)
    } else {
        (left, right_t.transpose())
    };
    let raw = svd.singular_values;

    let m = n.min(p);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));

    let mut u = DMatrix::zeros(n, m);
    let mut v = DMatrix::zeros(p, m);
    let mut lambdas = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u_raw.column(src).clone_owned();
        let mut vcol = v_raw.column(src).clone_owned();
        let pivot = ucol
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        u.set_column(dst, &ucol);
        v.set_column(dst, &vcol);
        lambdas.push(raw[src].max(0.0));
    }
    let floor = SINGULAR_VALUE_FLOOR * lambdas.first().copied().unwrap_or(0.0);
    for l in &mut lambdas {
        if *l < floor {
            *l = 0.0;
        }
    }
    Ok(SpectralDecomposition {
        u,
        v,
        lambdas,
        n_rows: n,
        n_cols: p,
    })
}

/// Singular values only, in decreasing order.
pub fn singular_values(x: &RealMatrix) -> Result<Vec<f64>> {
    let mut s: Vec<f64> = x.to_dmatrix().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Largest singular value through the eigenvalues of the smaller Gram matrix.
pub fn largest_singular_value(x: &DMatrix<f64>) -> f64 {
    let gram = if x.nrows() <= x.ncols() {
        x * x.transpose()
    } else {
        x.transpose() * x
    };
    gram.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max)
        .sqrt()
}

/// `sum_i u_i d_hat_i v_i^T`.
pub fn reconstruct(dec: &SpectralDecomposition, d_hat: &[f64]) -> Result<RealMatrix> {
    if d_hat.len() != dec.n_components() {
        return Err(Error::validation(format!(
            "expected {} shrunk singular values, got {}",
            dec.n_components(),
            d_hat.len()
        )));
    }
    if d_hat.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::validation(
            "shrunk singular values must be finite and nonnegative",
        ));
    }
    let keep: Vec<usize> = (0..d_hat.len()).filter(|&k| d_hat[k] > 0.0).collect();
    if keep.is_empty() {
        return Ok(RealMatrix::zeros(dec.n_rows, dec.n_cols));
    }
    let mut us = DMatrix::zeros(dec.n_rows, keep.len());
    let mut vs = DMatrix::zeros(dec.n_cols, keep.len());
    for (dst, &k) in keep.iter().enumerate() {
        us.set_column(dst, &(dec.u.column(k) * d_hat[k]));
        vs.set_column(dst, &dec.v.column(k));
    }
    Ok(RealMatrix::from_dmatrix(&(us * vs.transpose())))
}

/// `||w_hat - w||_F^2 / ||w||_F^2`.
pub fn relative_mse(w_hat: &RealMatrix, w: &RealMatrix) -> Result<f64> {
    w_hat.same_shape(w)?;
    let denom = w.frobenius_norm_sq();
    if denom <= 0.0 {
        return Err(Error::validation("relative MSE needs a nonzero signal"));
    }
    let num: f64 = w_hat
        .as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / denom)
}

/// Number of strictly positive shrunk singular values.
pub fn estimated_rank(d_hat: &[f64]) -> usize {
    d_hat.iter().filter(|&&d| d > 0.0).count()
}
