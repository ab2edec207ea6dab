//! Dense matrices and the closed-form solvers for the output-layer weights.
//!
//! Given the hidden-layer output `H` (N×L) and targets `T` (N×m) the output
//! weights `beta` (L×m) come from one of three routes:
//!
//! * [`solve_least_squares`]: minimum-norm least squares through the
//!   Moore-Penrose pseudoinverse, `beta = pinv(H) T`.
//! * [`solve_ridge_primal`]: `beta = (I/lambda + HᵀH)⁻¹ HᵀT`, an L×L system.
//! * [`solve_ridge_dual`]: `beta = Hᵀ (I/lambda + HHᵀ)⁻¹ T`, an N×N system.
//!
//! Note the penalty is `1/lambda`, so a *smaller* lambda regularizes harder.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

/// Singular values below `PINV_RTOL_FACTOR * max(N, L) * sigma_max` are dropped.
pub const PINV_RTOL_FACTOR: f64 = 1e-12;

/// Row-major dense matrix of finite `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Usage(format!(
                "matrix data has {} entries, expected {rows}x{cols} = {}",
                data.len(),
                rows * cols
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite matrix entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Usage(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
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

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(v.is_finite());
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Usage(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute elementwise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub(crate) fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &DMatrix<f64>) -> Matrix {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(m[(r, c)]);
            }
        }
        Matrix { rows, cols, data }
    }
}

/// Ridge regularization factor. The penalty added to the Gram matrix is `I/lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RidgeConfig {
    lambda: f64,
}

impl RidgeConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Config(format!(
                "ridge lambda must be a positive finite number, got {lambda}"
            )));
        }
        Ok(RidgeConfig { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Which of the two algebraically equivalent ridge systems to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RidgeForm {
    /// L×L system `(I/lambda + HᵀH) beta = HᵀT`.
    Primal,
    /// N×N system `(I/lambda + HHᵀ) alpha = T`, `beta = Hᵀ alpha`.
    Dual,
}

/// Picks the form with the smaller Gram matrix; ties go to primal.
pub fn choose_ridge_form(samples: usize, hidden: usize) -> RidgeForm {
    if samples < hidden {
        RidgeForm::Dual
    } else {
        RidgeForm::Primal
    }
}

fn check_system(h: &Matrix, t: &Matrix) -> Result<()> {
    if h.rows != t.rows {
        return Err(Error::Usage(format!(
            "H has {} rows but T has {}",
            h.rows, t.rows
        )));
    }
    if h.rows == 0 || h.cols == 0 || t.cols == 0 {
        return Err(Error::Usage(format!(
            "empty system: H is {}x{}, T is {}x{}",
            h.rows, h.cols, t.rows, t.cols
        )));
    }
    if !h.all_finite() || !t.all_finite() {
        return Err(Error::Data("non-finite entry in H or T".into()));
    }
    Ok(())
}

/// `pinv(a) * b` from the SVD of `a`, dropping singular values below
/// `rtol * sigma_max`.
fn svd_pinv_solve(a: DMatrix<f64>, b: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    let cols = a.ncols();
    let svd = a.svd(true, true);
    let (u, v_t) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Data("SVD did not produce singular vectors".into())),
    };
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().fold(0.0f64, |m, s| m.max(*s));
    let cutoff = rtol * sigma_max;

    // beta = V * diag(1/s) * Uᵀ b, skipping the dropped directions.
    let utb = u.transpose() * b;
    let mut scaled = DMatrix::<f64>::zeros(sigma.len(), b.ncols());
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            for c in 0..b.ncols() {
                scaled[(k, c)] = utb[(k, c)] / s;
            }
        }
    }
    let out = v_t.transpose() * scaled;
    debug_assert_eq!(out.shape(), (cols, b.ncols()));
    Ok(out)
}

/// Minimum-norm least-squares solution `beta = pinv(H) T`.
///
/// Tall systems are first reduced with a Householder QR so the SVD runs on
/// the L×L triangular factor, which has the same singular values as `H`.
pub fn solve_least_squares(h: &Matrix, t: &Matrix) -> Result<Matrix> {
    check_system(h, t)?;
    let (n, l) = h.shape();
    let rtol = PINV_RTOL_FACTOR * n.max(l) as f64;
    let hn = h.to_na();
    let mut tn = t.to_na();
    let beta = if n > l {
        let qr = hn.qr();
        qr.q_tr_mul(&mut tn);
        let r = qr.r();
        let c = tn.rows(0, l).into_owned();
        svd_pinv_solve(r, &c, rtol)?
    } else {
        svd_pinv_solve(hn, &tn, rtol)?
    };
    Ok(Matrix::from_na(&beta))
}

/// Solves the symmetric positive definite system `a x = b` by Cholesky,
/// falling back to the pseudoinverse when the factorization fails.
fn solve_spd(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    match Cholesky::new(a.clone()) {
        Some(chol) => Ok(chol.solve(b)),
        None => {
            log::debug!("cholesky failed on {n}x{n} ridge system, using SVD");
            svd_pinv_solve(a, b, PINV_RTOL_FACTOR * n as f64)
        }
    }
}

fn add_scaled_identity(m: &mut DMatrix<f64>, value: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += value;
    }
}

/// `beta = (I/lambda + HᵀH)⁻¹ HᵀT`.
pub fn solve_ridge_primal(h: &Matrix, t: &Matrix, cfg: RidgeConfig) -> Result<Matrix> {
    check_system(h, t)?;
    let hn = h.to_na();
    let tn = t.to_na();
    let mut gram = hn.tr_mul(&hn);
    add_scaled_identity(&mut gram, 1.0 / cfg.lambda);
    let rhs = hn.tr_mul(&tn);
    Ok(Matrix::from_na(&solve_spd(gram, &rhs)?))
}

/// `beta = Hᵀ (I/lambda + HHᵀ)⁻¹ T`.
pub fn solve_ridge_dual(h: &Matrix, t: &Matrix, cfg: RidgeConfig) -> Result<Matrix> {
    check_system(h, t)?;
    let hn = h.to_na();
    let tn = t.to_na();
    let mut gram = &hn * hn.transpose();
    add_scaled_identity(&mut gram, 1.0 / cfg.lambda);
    let alpha = solve_spd(gram, &tn)?;
    Ok(Matrix::from_na(&hn.tr_mul(&alpha)))
}

/// Ridge solution using whichever form has the smaller Gram matrix.
pub fn solve_ridge(h: &Matrix, t: &Matrix, cfg: RidgeConfig) -> Result<Matrix> {
    match choose_ridge_form(h.rows, h.cols) {
        RidgeForm::Primal => solve_ridge_primal(h, t, cfg),
        RidgeForm::Dual => solve_ridge_dual(h, t, cfg),
    }
}
