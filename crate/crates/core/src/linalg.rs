//! Dense linear-algebra helpers shared by the solvers and diagnostics.
//!
//! Rank decisions use singular values with the threshold
//! `RANK_RTOL * sigma_max`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{DfmError, Result};

/// Relative singular-value threshold for rank and null-space decisions.
pub const RANK_RTOL: f64 = 1e-9;

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

fn threshold(sv: &DVector<f64>) -> f64 {
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    RANK_RTOL * smax
}

/// Numerical rank.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let tol = threshold(&sv);
    if sv.iter().all(|&s| s == 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 || m.iter().all(|&v| v == 0.0) {
        return DMatrix::identity(n, n);
    }
    // Thin SVD of a wide matrix drops the trailing right singular vectors, so pad to square.
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let tol = threshold(&svd.singular_values);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= tol)
        .collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        basis.set_column(c, &v_t.row(k).transpose());
    }
    basis
}

/// Orthonormal basis (as rows) of the row space of `m`.
pub fn row_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 || n == 0 || m.iter().all(|&v| v == 0.0) {
        return DMatrix::zeros(0, n);
    }
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let tol = threshold(&svd.singular_values);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > tol)
        .collect();
    let mut basis = DMatrix::zeros(keep.len(), n);
    for (r, &k) in keep.iter().enumerate() {
        basis.set_row(r, &v_t.row(k));
    }
    basis
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let tol = threshold(&svd.singular_values).max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(tol).expect("u and v_t computed")
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Solves the symmetric saddle-point system
///
/// ```text
/// [ H   A^T ] [dx]   [r1]
/// [ A  -δI  ] [ w] = [r2]
/// ```
///
/// with `δ = regularization`. Returns `RankDeficientCoupling` when the
/// factorization is singular or the solution fails a residual check.
pub fn solve_kkt(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    r1: &DVector<f64>,
    r2: &DVector<f64>,
    regularization: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let m = a.nrows();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    for i in 0..m {
        k[(n + i, n + i)] = -regularization;
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(r1);
    rhs.rows_mut(n, m).copy_from(r2);

    let lu = k.clone().lu();
    let mut sol = lu.solve(&rhs).ok_or(DfmError::RankDeficientCoupling)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(DfmError::RankDeficientCoupling);
    }
    // Two rounds of iterative refinement recover accuracy lost to badly
    // scaled barrier curvature.
    for _ in 0..2 {
        let resid = &rhs - &k * &sol;
        match lu.solve(&resid) {
            Some(c) if c.iter().all(|v| v.is_finite()) => sol += c,
            _ => break,
        }
    }
    let resid = &k * &sol - &rhs;
    let scale = 1.0 + max_abs(&rhs) + k.amax() * max_abs(&sol);
    if max_abs(&resid) > 1e-9 * scale {
        return Err(DfmError::RankDeficientCoupling);
    }
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}
