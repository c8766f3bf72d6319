//! Interpolation of the masked current-driven entries of a difference
//! measurement matrix.
//!
//! Two methods are provided. Linear interpolation fills each diagonal entry
//! with the arithmetic mean of its two neighbors and closes the system with
//! symmetry and zero column sums. Geometric interpolation minimizes
//! `−Σ_j e_jᵀ Vᵀ S_B⁺ V e_j` under the same constraints, where `S_B` is the
//! summed sensitivity over an a-priori support bound; the minimizer is
//! computed analytically from an m×m system built out of the selector
//! matrices `A^{(j)}` and offsets `b^{(j)}`.
//!
//! Index conventions: unknown entries are exactly those with cyclic
//! `|j−k| ≤ 1`; all index arithmetic is modulo m.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::forward::{EntryKind, MeasurementMatrix};
use crate::sensitivity::BoundMatrix;

#[derive(Debug, Error)]
pub enum InterpolateError {
    #[error("interpolation needs at least 5 electrodes, got {0}")]
    TooFewElectrodes(usize),
    #[error("bound matrix is {0}x{0} but the measurement has m = {1}")]
    DimensionMismatch(usize, usize),
    #[error("interpolation system numerically singular (condition estimate {cond:e}); the support bound may be too small or the sensitivity degenerate")]
    SingularSystem { cond: f64 },
    #[error("linear interpolation system rank-deficient beyond repair: {0}")]
    Unsolvable(String),
    #[error("reference matrix has zero Frobenius norm")]
    ZeroReference,
}

/// Flags the cyclic `|j−k| ≤ 1` entries as unknown and zeroes their values;
/// all other entries are untouched.
pub fn mask_current_driven(v: &MeasurementMatrix) -> MeasurementMatrix {
    let m = v.m;
    let mut out = v.clone();
    for j in 0..m {
        for k in 0..m {
            if crate::cyclic_distance(j, k, m) <= 1 {
                out.entries[(j, k)] = 0.0;
                out.set_mask(j, k, EntryKind::CurrentDriven);
            }
        }
    }
    out
}

/// Row sums of the known (cyclic `|j−k| > 1`) entries: `s_j = Σ_{|l−j|>1} V_jl`.
fn known_row_sums(v: &MeasurementMatrix) -> Vec<f64> {
    let m = v.m;
    (0..m)
        .map(|j| {
            (0..m)
                .filter(|&l| crate::cyclic_distance(j, l, m) > 1)
                .map(|l| v.entries[(j, l)])
                .sum()
        })
        .collect()
}

/// Writes the band values `w_j = V_{j−1,j}` and diagonal `d_j = V_{jj}` into
/// a copy of `v`, marking them interpolated.
fn fill_band(v: &MeasurementMatrix, w: &[f64], d: &[f64]) -> MeasurementMatrix {
    let m = v.m;
    let mut out = v.clone();
    for j in 0..m {
        let jm1 = (j + m - 1) % m;
        out.entries[(jm1, j)] = w[j];
        out.entries[(j, jm1)] = w[j];
        out.entries[(j, j)] = d[j];
        out.set_mask(jm1, j, EntryKind::Interpolated);
        out.set_mask(j, jm1, EntryKind::Interpolated);
        out.set_mask(j, j, EntryKind::Interpolated);
    }
    out
}

/// Linear interpolation: keeps known entries, enforces symmetry, zero column
/// sums and `V_jj = (V_{j−1,j} + V_{j,j+1})/2`. Unique for odd m; for even m
/// the minimum-norm least-squares solution of the stacked constraint system
/// is returned.
pub fn linear_interpolate(v: &MeasurementMatrix) -> Result<MeasurementMatrix, InterpolateError> {
    let m = v.m;
    if m < 5 {
        return Err(InterpolateError::TooFewElectrodes(m));
    }
    let s = known_row_sums(v);

    // unknowns x = [w_0..w_{m-1}, d_0..d_{m-1}] with w_j = V_{j-1,j}
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    let mut rhs = DVector::zeros(2 * m);
    for k in 0..m {
        // column sum: d_k + w_k + w_{k+1} = −s_k
        a[(k, m + k)] = 1.0;
        a[(k, k)] += 1.0;
        a[(k, (k + 1) % m)] += 1.0;
        rhs[k] = -s[k];
        // diagonal mean: d_k − (w_k + w_{k+1})/2 = 0
        a[(m + k, m + k)] = 1.0;
        a[(m + k, k)] -= 0.5;
        a[(m + k, (k + 1) % m)] -= 0.5;
    }

    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let x = svd
        .solve(&rhs, 1e-10 * max_sv)
        .map_err(|e| InterpolateError::Unsolvable(e.to_string()))?;

    let w: Vec<f64> = (0..m).map(|j| x[j]).collect();
    let d: Vec<f64> = (0..m).map(|j| x[m + j]).collect();
    Ok(fill_band(v, &w, &d))
}

/// Selector matrix `A^{(j)}` of the analytic geometric solution; maps the
/// unknown vector `w` to its contribution to column j.
fn selector(j: usize, m: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m, m);
    let jm1 = (j + m - 1) % m;
    let jp1 = (j + 1) % m;
    a[(jm1, j)] += 1.0;
    a[(jp1, jp1)] += 1.0;
    a[(j, j)] -= 1.0;
    a[(j, jp1)] -= 1.0;
    a
}

/// Offset vector `b^{(j)}`: known entries of row j, zero on the band, and
/// the negated known row sum on the diagonal position.
fn offset(j: usize, m: usize, v: &MeasurementMatrix, s: &[f64]) -> DVector<f64> {
    DVector::from_fn(m, |k, _| match crate::cyclic_distance(k, j, m) {
        0 => -s[j],
        1 => 0.0,
        _ => v.entries[(j, k)],
    })
}

/// Geometric interpolation per the analytic solution: solves
/// `A w = −b` with `A = −Σ_j A^{(j)ᵀ} S_B⁺ A^{(j)}` and fills the band.
pub fn geometric_interpolate(
    v: &MeasurementMatrix,
    bound: &BoundMatrix,
) -> Result<MeasurementMatrix, InterpolateError> {
    let m = v.m;
    if m < 5 {
        return Err(InterpolateError::TooFewElectrodes(m));
    }
    if bound.pinv.nrows() != m {
        return Err(InterpolateError::DimensionMismatch(bound.pinv.nrows(), m));
    }
    let s = known_row_sums(v);
    let p = &bound.pinv;

    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for j in 0..m {
        let aj = selector(j, m);
        let bj = offset(j, m, v, &s);
        let pat = p * &aj;
        a -= aj.transpose() * &pat;
        b -= aj.transpose() * (p * bj);
    }

    let (vals, q) = crate::linalg::sym_eigen(&a);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if min <= 0.0 { f64::INFINITY } else { max / min };
    if !(min > 1e-14 * max) {
        return Err(InterpolateError::SingularSystem { cond });
    }
    if cond > 1e12 {
        log::warn!("geometric interpolation system ill-conditioned (cond ≈ {cond:e})");
    }
    let inv = DMatrix::from_diagonal(&vals.map(|l| 1.0 / l));
    let w_vec = -(&q * inv * q.transpose() * b);

    let w: Vec<f64> = (0..m).map(|j| w_vec[j]).collect();
    let d: Vec<f64> = (0..m)
        .map(|j| -s[j] - w[j] - w[(j + 1) % m])
        .collect();
    Ok(fill_band(v, &w, &d))
}

/// Value of the quadratic functional `−Σ_j e_jᵀ Vᵀ S_B⁺ V e_j`.
pub fn objective_value(v: &DMatrix<f64>, bound: &BoundMatrix) -> f64 {
    -(v.transpose() * &bound.pinv * v).trace()
}

/// Relative interpolation error `‖V_true − V_interp‖_F / ‖V_true‖_F`.
pub fn interpolation_error(
    v_true: &MeasurementMatrix,
    v_interp: &MeasurementMatrix,
) -> Result<f64, InterpolateError> {
    let denom = v_true.frobenius();
    if denom == 0.0 {
        return Err(InterpolateError::ZeroReference);
    }
    Ok((&v_true.entries - &v_interp.entries).norm() / denom)
}
