//! Dense complex linear-algebra kernels.
//!
//! Every matrix in the crate is a column-major [`nalgebra::DMatrix`] of
//! [`Complex64`]. Hermitian inputs are checked against a relative Frobenius
//! tolerance before any routine relies on their symmetry.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

/// Relative Frobenius tolerance for the Hermitian check.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues within this fraction of `max(|lambda|_max, 1)` are treated as zero.
pub const PSD_CLIP: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||a - b||_F / ||b||_F`, or the absolute difference when `b` is zero.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let d = frobenius(&(a - b));
    let s = frobenius(b);
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(a: &CMat, what: &str) -> Result<()> {
    if is_finite(a) {
        Ok(())
    } else {
        invalid(format!("{what} has non-finite entries"))
    }
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = frobenius(a);
    let d = frobenius(&(a - a.adjoint()));
    if scale > 0.0 {
        d <= tol * scale
    } else {
        d <= tol
    }
}

/// `(a + a^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition `A = U diag(values) U^H` with values sorted descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub vectors: CMat,
    pub values: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> CMat {
        self.map_values(|v| v)
    }

    /// `U diag(f(values)) U^H`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.vectors.adjoint()
    }

    /// First `k` eigenvectors as an `n x k` matrix.
    pub fn leading_vectors(&self, k: usize) -> CMat {
        self.vectors.columns(0, k).into_owned()
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Hermitian eigendecomposition via Householder tridiagonalization and
/// implicit QR (nalgebra's `SymmetricEigen`), eigenvalues sorted descending.
///
/// Eigenvalues whose magnitude is below `PSD_CLIP * max(|lambda|_max, 1)` are
/// flushed to exactly zero, so round-off never turns a PSD input indefinite.
pub fn hermitian_eig(a: &CMat) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return invalid(format!("eigendecomposition of a {}x{} matrix", a.nrows(), a.ncols()));
    }
    ensure_finite(a, "eigendecomposition input")?;
    if !is_hermitian(a, HERMITIAN_TOL) {
        return invalid("eigendecomposition input is not Hermitian");
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(EigenDecomposition { vectors: CMat::zeros(0, 0), values: vec![] });
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep the decomposition's output order
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
        let v = eig.eigenvalues[src];
        values.push(if v.abs() <= PSD_CLIP * scale { 0.0 } else { v });
    }
    Ok(EigenDecomposition { vectors, values })
}

fn psd_eig(a: &CMat, what: &str) -> Result<EigenDecomposition> {
    let eig = hermitian_eig(a)?;
    let scale = eig.values.first().copied().unwrap_or(0.0).max(1.0);
    if eig.min_value() < -PSD_CLIP * scale {
        return invalid(format!("{what}: matrix is indefinite (min eigenvalue {:e})", eig.min_value()));
    }
    Ok(eig)
}

/// Hermitian PSD square root `S` with `S S = A`.
pub fn hermitian_sqrt(a: &CMat) -> Result<CMat> {
    let eig = psd_eig(a, "hermitian_sqrt")?;
    Ok(eig.map_values(|v| v.max(0.0).sqrt()))
}

/// `A^{-1/2}` for a positive definite `A`.
pub fn hermitian_inv_sqrt(a: &CMat) -> Result<CMat> {
    let eig = psd_eig(a, "hermitian_inv_sqrt")?;
    if eig.min_value() <= 0.0 {
        return invalid("hermitian_inv_sqrt: matrix is singular");
    }
    Ok(eig.map_values(|v| 1.0 / v.sqrt()))
}

/// Elementwise `max(x, 0)`.
pub fn positive_part(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Stacks the columns of `a` into one vector.
pub fn vec(a: &CMat) -> CVec {
    // nalgebra storage is column-major
    CVec::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return invalid(format!("unvec: length {} != {rows}x{cols}", v.len()));
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Vertical concatenation.
pub fn vstack(blocks: &[CMat]) -> Result<CMat> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    if blocks.iter().any(|b| b.ncols() != cols) {
        return invalid("vstack: column counts differ");
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    Ok(out)
}

/// Horizontal concatenation.
pub fn hstack(blocks: &[CMat]) -> Result<CMat> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    if blocks.iter().any(|b| b.nrows() != rows) {
        return invalid("hstack: row counts differ");
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    Ok(out)
}

/// `s * [I; 0]` or `s * [I, 0]`: the truncated identity of the given shape.
pub fn scaled_identity(rows: usize, cols: usize, s: f64) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows.min(cols) {
        m[(i, i)] = c64(s, 0.0);
    }
    m
}

/// Inverse of a Hermitian positive definite matrix (Cholesky, LU fallback).
pub fn inv_hpd(a: &CMat) -> Result<CMat> {
    let h = hermitian_part(a);
    if let Some(ch) = h.clone().cholesky() {
        return Ok(ch.inverse());
    }
    h.try_inverse()
        .filter(is_finite)
        .ok_or_else(|| Error::InvalidInput("matrix is singular".into()))
}

/// `b * a^{-1}` for a general square `a`.
pub fn solve_right(b: &CMat, a: &CMat) -> Result<CMat> {
    // b a^{-1} = (a^{-H} b^H)^H
    let x = a
        .adjoint()
        .lu()
        .solve(&b.adjoint())
        .filter(is_finite)
        .ok_or_else(|| Error::InvalidInput("singular system".into()))?;
    Ok(x.adjoint())
}

/// Real embedding `[[Re A, -Im A], [Im A, Re A]]`; PSD iff `A` is PSD for Hermitian `A`.
pub fn realify(a: &CMat) -> RMat {
    let (m, n) = a.shape();
    let mut out = RMat::zeros(2 * m, 2 * n);
    for j in 0..n {
        for i in 0..m {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(m + i, j)] = z.im;
            out[(m + i, n + j)] = z.re;
        }
    }
    out
}
