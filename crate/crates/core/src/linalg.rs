//! Thin helpers over nalgebra for the Hermitian / symmetric work used across
//! the crate.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn symmetric_eigenvalues(m: &RMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest |m - m^H| entry relative to the largest |m| entry.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

pub fn symmetric_defect(m: &RMatrix) -> f64 {
    let scale = m.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).iter().map(|x| x.abs()).fold(0.0, f64::max) / scale
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Solves `a x = b` for Hermitian positive definite `a`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("Cholesky factorisation failed (matrix not HPD)"))?;
    Ok(chol.solve(b))
}

/// Diagonal scaling `d_i = 1/sqrt(|m_ii|)` that brings a symmetric matrix to
/// unit diagonal. Zero diagonals keep scale 1.
pub fn equilibration(m: &RMatrix) -> Vec<f64> {
    m.diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d.abs().sqrt() } else { 1.0 })
        .collect()
}

fn scale_sym(m: &RMatrix, d: &[f64]) -> RMatrix {
    RMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i] * d[j])
}

/// 2-norm condition number of the equilibrated symmetric matrix.
pub fn equilibrated_condition(m: &RMatrix) -> f64 {
    let d = equilibration(m);
    let ev = symmetric_eigenvalues(&scale_sym(m, &d));
    let max = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let min = ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a symmetric (possibly indefinite) matrix through diagonal
/// equilibration, refusing matrices whose equilibrated condition number is
/// at or above `max_condition`.
pub fn symmetric_inverse(m: &RMatrix, max_condition: f64) -> Result<RMatrix> {
    if !m.is_square() {
        return Err(Error::invalid("matrix must be square"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    let cond = equilibrated_condition(m);
    if !(cond < max_condition) {
        return Err(Error::numerical(format!(
            "matrix is singular or ill-conditioned (equilibrated condition number {cond:.3e} >= {max_condition:.1e})"
        )));
    }
    let d = equilibration(m);
    let scaled = scale_sym(m, &d);
    let inv = match scaled.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => match (-scaled.clone()).cholesky() {
            Some(ch) => -ch.inverse(),
            None => scaled
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::numerical("LU inverse failed"))?,
        },
    };
    let mut out = scale_sym(&inv, &d);
    // enforce exact symmetry lost to rounding
    let t = out.transpose();
    out = (out + t) * 0.5;
    Ok(out)
}

/// `(A^T A)^-1` from a QR factorisation of the column-equilibrated `A`,
/// without forming the Gram matrix. Refuses when the equilibrated condition
/// number of `A^T A` is at or above `max_condition`.
pub fn gram_inverse(a: &RMatrix, max_condition: f64) -> Result<RMatrix> {
    let p = a.ncols();
    if a.nrows() < p {
        return Err(Error::invalid("need at least as many rows as columns"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("matrix has non-finite entries"));
    }
    let d: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect();
    let scaled = RMatrix::from_fn(a.nrows(), p, |i, j| a[(i, j)] * d[j]);
    let r = scaled.qr().r();
    let sv = r.singular_values();
    let max = sv.max();
    let min = sv.min();
    let cond = if min > 0.0 { (max / min).powi(2) } else { f64::INFINITY };
    if !(cond < max_condition) {
        return Err(Error::numerical(format!(
            "matrix is singular or ill-conditioned (equilibrated condition number {cond:.3e} >= {max_condition:.1e})"
        )));
    }
    let r_inv = r
        .solve_upper_triangular(&RMatrix::identity(p, p))
        .ok_or_else(|| Error::numerical("triangular solve failed"))?;
    let inv = &r_inv * r_inv.transpose();
    Ok(scale_sym(&inv, &d))
}
