//! Sensitivity matrices: the per-pixel m×m matrices `S_i`, the bound matrix
//! `S_B` with its Moore–Penrose pseudoinverse, the Fréchet derivative applied
//! to a pixelwise conductivity change, and the reduced linearized system with
//! current-driven rows removed.
//!
//! `(S_i)_{jk} = −∫_{P_i} ∇u^{(j)} · ∇u^{(k)} dx` with P1 elements reduces to
//! an area-weighted Gram matrix of the per-element solution gradients, so
//! each `S_i` is symmetric negative semidefinite by construction.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exec;
use crate::fem::{element_gradients, ShuntSystem};
use crate::forward::{ConductivityField, DrivePattern, ForwardError, MeasurementMatrix};
use crate::geometry::{ElectrodeLayout, Mesh, PixelPartition, SupportBound};
use crate::linalg;

/// Relative eigenvalue cutoff for the `S_B` pseudoinverse. `S_B` has a
/// constant-vector nullspace, so an explicit cutoff is required.
pub const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("pixel {0} contains no mesh elements")]
    EmptyPixel(usize),
    #[error("kappa has {got} entries for {expected} pixels")]
    KappaLengthMismatch { expected: usize, got: usize },
    #[error("support bound contains no pixels")]
    EmptyBound,
    #[error("support bound references pixel {pixel} but the tensor has {r} pixels")]
    BoundOutOfRange { pixel: usize, r: usize },
    #[error("reduced system needs at least 5 electrodes, got {0}")]
    TooFewElectrodes(usize),
    #[error("electrode counts differ: sensitivity has m={0}, measurement m={1}")]
    ElectrodeCountMismatch(usize, usize),
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// All pixel matrices `S_i ∈ R^{m×m}`, i = 1..r.
#[derive(Debug, Clone)]
pub struct SensitivityTensor {
    pub m: usize,
    pub pixel_matrices: Vec<DMatrix<f64>>,
    /// Description of the reference conductivity the tensor was built for.
    pub sigma0_description: String,
}

/// `S_B = Σ_{P_i ⊆ B} S_i` with its Moore–Penrose pseudoinverse.
#[derive(Debug, Clone)]
pub struct BoundMatrix {
    pub matrix: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
    pub radius: f64,
}

impl SensitivityTensor {
    pub fn r(&self) -> usize {
        self.pixel_matrices.len()
    }

    /// Flattened standard sensitivity matrix `S ∈ R^{m²×r}` with
    /// `S_{(j−1)m+k, i} = (S_i)_{jk}`.
    pub fn flatten(&self) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(m * m, self.r(), |row, i| {
            let (j, k) = (row / m, row % m);
            self.pixel_matrices[i][(j, k)]
        })
    }

    /// CSV export: one line per pixel, `i` followed by the m² row-major
    /// entries of `S_i`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (i, mat) in self.pixel_matrices.iter().enumerate() {
            let _ = write!(s, "{i}");
            for j in 0..self.m {
                for k in 0..self.m {
                    let _ = write!(s, ",{}", mat[(j, k)]);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SensitivityError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Assembles all pixel matrices for the reference conductivity `sigma0` on
/// `mesh` (typically the reconstruction mesh, distinct from the forward one).
pub fn assemble_sensitivity(
    mesh: &Mesh,
    layout: &ElectrodeLayout,
    partition: &PixelPartition,
    sigma0: &ConductivityField,
) -> Result<SensitivityTensor, SensitivityError> {
    let m = layout.m;
    if let Some(i) = partition.pixels.iter().position(|p| p.is_empty()) {
        return Err(SensitivityError::EmptyPixel(i));
    }

    let system = ShuntSystem::new(mesh, layout, sigma0)?;
    let solves: Vec<Result<Vec<[f64; 2]>, ForwardError>> = exec::collect_indexed(m, |j| {
        let pattern = DrivePattern::adjacent(j, m);
        let sol = system.solve(&pattern.currents)?;
        Ok(element_gradients(mesh, &sol.nodal))
    });
    let gradients: Vec<Vec<[f64; 2]>> = solves.into_iter().collect::<Result<_, _>>()?;

    let pixel_matrices = exec::collect_indexed(partition.r(), |i| {
        let mut s = DMatrix::zeros(m, m);
        for j in 0..m {
            for k in j..m {
                let mut acc = 0.0;
                for &t in &partition.pixels[i] {
                    let gj = gradients[j][t];
                    let gk = gradients[k][t];
                    acc += mesh.triangle_area(t) * (gj[0] * gk[0] + gj[1] * gk[1]);
                }
                s[(j, k)] = -acc;
                s[(k, j)] = -acc;
            }
        }
        s
    });

    Ok(SensitivityTensor {
        m,
        pixel_matrices,
        sigma0_description: sigma0.description.clone(),
    })
}

/// Fréchet derivative applied to a pixelwise change: `U'(σ0)κ = Σ_i κ_i S_i`.
pub fn frechet_apply(s: &SensitivityTensor, kappa: &[f64]) -> Result<DMatrix<f64>, SensitivityError> {
    if kappa.len() != s.r() {
        return Err(SensitivityError::KappaLengthMismatch {
            expected: s.r(),
            got: kappa.len(),
        });
    }
    let mut out = DMatrix::zeros(s.m, s.m);
    for (ki, si) in kappa.iter().zip(&s.pixel_matrices) {
        if *ki != 0.0 {
            out += si * *ki;
        }
    }
    Ok(out)
}

/// Sums the pixel matrices over a support bound and computes the
/// pseudoinverse of the result.
pub fn bound_matrix(s: &SensitivityTensor, bound: &SupportBound) -> Result<BoundMatrix, SensitivityError> {
    if bound.pixel_indices.is_empty() {
        return Err(SensitivityError::EmptyBound);
    }
    let mut matrix = DMatrix::zeros(s.m, s.m);
    for &i in &bound.pixel_indices {
        if i >= s.r() {
            return Err(SensitivityError::BoundOutOfRange { pixel: i, r: s.r() });
        }
        matrix += &s.pixel_matrices[i];
    }
    let pinv = linalg::pseudoinverse_sym(&matrix, PINV_CUTOFF);
    Ok(BoundMatrix {
        matrix,
        pinv,
        radius: bound.radius,
    })
}

/// Removes the current-driven rows (cyclic `|j−k| ≤ 1`) from the flattened
/// sensitivity matrix and data vector: exactly `m(m−3)` rows survive.
pub fn reduce_system(
    s: &SensitivityTensor,
    v: &MeasurementMatrix,
) -> Result<(DMatrix<f64>, DVector<f64>), SensitivityError> {
    let m = s.m;
    if m < 5 {
        return Err(SensitivityError::TooFewElectrodes(m));
    }
    if v.m != m {
        return Err(SensitivityError::ElectrodeCountMismatch(m, v.m));
    }
    let rows: Vec<(usize, usize)> = (0..m)
        .flat_map(|j| (0..m).map(move |k| (j, k)))
        .filter(|&(j, k)| crate::cyclic_distance(j, k, m) > 1)
        .collect();
    debug_assert_eq!(rows.len(), m * (m - 3));
    let s_red = DMatrix::from_fn(rows.len(), s.r(), |row, i| {
        let (j, k) = rows[row];
        s.pixel_matrices[i][(j, k)]
    });
    let v_red = DVector::from_iterator(rows.len(), rows.iter().map(|&(j, k)| v.entries[(j, k)]));
    Ok((s_red, v_red))
}
