//! Small dense symmetric-matrix helpers shared across the crate: spectral
//! absolute value, PSD square roots, pseudoinverses with a relative cutoff.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("matrix is not symmetric: ‖M−Mᵀ‖_F = {asym:e} exceeds {tol:e}")]
    NotSymmetric { asym: f64, tol: f64 },
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition of a (symmetrized) matrix: `(eigenvalues, Q)` with
/// `M = Q diag(λ) Qᵀ`.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let e = symmetrize(m).symmetric_eigen();
    (e.eigenvalues, e.eigenvectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen(m);
    vals.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_abs_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen(m);
    vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Condition estimate `max|λ| / min|λ|` of a symmetric matrix; infinite when
/// the smallest magnitude eigenvalue vanishes.
pub fn condition_sym(m: &DMatrix<f64>) -> f64 {
    let (vals, _) = sym_eigen(m);
    let max = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Moore–Penrose pseudoinverse of a symmetric matrix. Eigenvalues with
/// `|λ| <= rel_cutoff · max|λ|` are treated as zero.
pub fn pseudoinverse_sym(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (vals, q) = sym_eigen(m);
    let max = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let inv = DVector::from_iterator(
        vals.len(),
        vals.iter()
            .map(|&l| if l.abs() <= rel_cutoff * max { 0.0 } else { 1.0 / l }),
    );
    &q * DMatrix::from_diagonal(&inv) * q.transpose()
}

/// Spectral absolute value `|M| = Q |Λ| Qᵀ` of a symmetric matrix.
pub fn matrix_abs_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, q) = sym_eigen(m);
    let abs = vals.map(|l| l.abs());
    &q * DMatrix::from_diagonal(&abs) * q.transpose()
}

/// Inverse PSD square root `M^{-1/2}` of a positive definite matrix. The PSD
/// root is symmetric, so it serves as both `A^{-1}` and `A^{-ᵀ}`.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let (vals, q) = sym_eigen(m);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite(min));
    }
    let d = vals.map(|l| 1.0 / l.sqrt());
    Ok(&q * DMatrix::from_diagonal(&d) * q.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -3.0]));
        let a = matrix_abs_sym(&m);
        assert!((a[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((a[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(a[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn pseudoinverse_of_rank_deficient() {
        // projector onto span{(1,-1)}/sqrt(2): pinv equals itself
        let m = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        let p = pseudoinverse_sym(&m, 1e-12);
        assert!((&p - &m).norm() < 1e-12);
    }

    #[test]
    fn inv_sqrt_rejects_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(inv_sqrt_spd(&m).is_err());
    }
}
