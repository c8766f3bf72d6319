//! Shunt-model forward solver and measurement matrices.
//!
//! For each drive index `k` a unit current is driven through the adjacent
//! electrode pair `(k, k+1)` and voltages are read between all adjacent pairs
//! `(j, j+1)`, giving the m×m measurement matrix `U(σ)`. Entries with cyclic
//! `|j−k| ≤ 1` sit on current-driven electrodes and are flagged as such.

use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::exec;
use crate::fem::ShuntSystem;
use crate::geometry::{ElectrodeLayout, GeometryError, Mesh};

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("conductivity must be strictly positive everywhere (element {element} has {value})")]
    NonPositiveConductivity { element: usize, value: f64 },
    #[error("conductivity has {got} values but the mesh has {expected} elements")]
    ConductivityLengthMismatch { expected: usize, got: usize },
    #[error("drive currents must sum to zero, got {0:e}")]
    UnbalancedCurrents(f64),
    #[error("drive current vector has {got} entries for {expected} electrodes")]
    PatternLengthMismatch { expected: usize, got: usize },
    #[error("singular shunt system: {details}")]
    SingularSystem { details: String },
    #[error("linear solve residual {residual:e} exceeds 1e-10")]
    ResidualTooLarge { residual: f64 },
    #[error("electrode counts differ: {0} vs {1}")]
    ElectrodeCountMismatch(usize, usize),
    #[error("measurement CSV parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Piecewise-constant conductivity, one value per mesh element.
#[derive(Debug, Clone)]
pub struct ConductivityField {
    values: Vec<f64>,
    pub description: String,
}

impl ConductivityField {
    pub fn new(values: Vec<f64>, description: impl Into<String>) -> Result<Self, ForwardError> {
        if let Some((element, &value)) = values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(ForwardError::NonPositiveConductivity { element, value });
        }
        Ok(ConductivityField {
            values,
            description: description.into(),
        })
    }

    pub fn constant(mesh: &Mesh, value: f64, description: impl Into<String>) -> Result<Self, ForwardError> {
        Self::new(vec![value; mesh.triangle_count()], description)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Result<Self, ForwardError> {
        Self::new(
            self.values.iter().map(|v| v * c).collect(),
            format!("{} * {c}", self.description),
        )
    }
}

/// Adjacent drive pattern: `I_l = δ_{k,l} − δ_{k+1,l}` with cyclic index.
#[derive(Debug, Clone)]
pub struct DrivePattern {
    pub k: usize,
    pub currents: Vec<f64>,
}

impl DrivePattern {
    pub fn adjacent(k: usize, m: usize) -> Self {
        let mut currents = vec![0.0; m];
        currents[k % m] = 1.0;
        currents[(k + 1) % m] -= 1.0;
        DrivePattern { k: k % m, currents }
    }

    fn validate(&self, m: usize) -> Result<(), ForwardError> {
        if self.currents.len() != m {
            return Err(ForwardError::PatternLengthMismatch {
                expected: m,
                got: self.currents.len(),
            });
        }
        let sum: f64 = self.currents.iter().sum();
        if sum.abs() > 1e-12 {
            return Err(ForwardError::UnbalancedCurrents(sum));
        }
        Ok(())
    }
}

/// Discrete shunt-model potential for one drive.
#[derive(Debug, Clone)]
pub struct PotentialField {
    /// Nodal values on the mesh, gauge-fixed so electrode potentials sum to 0.
    pub nodal: Vec<f64>,
    pub electrode_potentials: Vec<f64>,
    pub solve_residual: f64,
}

/// Classification of a measurement entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Measured,
    CurrentDriven,
    Interpolated,
}

impl EntryKind {
    pub fn as_char(self) -> char {
        match self {
            EntryKind::Measured => 'M',
            EntryKind::CurrentDriven => 'C',
            EntryKind::Interpolated => 'I',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'M' => Some(EntryKind::Measured),
            'C' => Some(EntryKind::CurrentDriven),
            'I' => Some(EntryKind::Interpolated),
            _ => None,
        }
    }
}

/// m×m voltage (difference) matrix with per-entry provenance mask.
#[derive(Debug, Clone)]
pub struct MeasurementMatrix {
    pub m: usize,
    pub entries: DMatrix<f64>,
    mask: Vec<EntryKind>,
}

impl MeasurementMatrix {
    pub fn new(entries: DMatrix<f64>, mask: Vec<EntryKind>) -> Self {
        let m = entries.nrows();
        assert_eq!(entries.ncols(), m);
        assert_eq!(mask.len(), m * m);
        MeasurementMatrix { m, entries, mask }
    }

    pub fn mask(&self, j: usize, k: usize) -> EntryKind {
        self.mask[j * self.m + k]
    }

    pub fn set_mask(&mut self, j: usize, k: usize, kind: EntryKind) {
        self.mask[j * self.m + k] = kind;
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.norm()
    }

    /// Entrywise difference `self − other`; the mask of `self` carries over.
    pub fn difference(&self, other: &MeasurementMatrix) -> Result<MeasurementMatrix, ForwardError> {
        if self.m != other.m {
            return Err(ForwardError::ElectrodeCountMismatch(self.m, other.m));
        }
        Ok(MeasurementMatrix {
            m: self.m,
            entries: &self.entries - &other.entries,
            mask: self.mask.clone(),
        })
    }

    /// Largest column-sum magnitude, for the zero-column-sum invariant.
    pub fn max_column_sum(&self) -> f64 {
        (0..self.m)
            .map(|k| self.entries.column(k).sum().abs())
            .fold(0.0, f64::max)
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.entries - self.entries.transpose()).norm()
    }

    /// CSV export: m lines of m comma-separated full-precision decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for j in 0..self.m {
            let row: Vec<String> = (0..self.m).map(|k| format!("{}", self.entries[(j, k)])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// Sidecar mask export: entries in {M, C, I}.
    pub fn mask_to_csv(&self) -> String {
        let mut s = String::new();
        for j in 0..self.m {
            let row: Vec<String> = (0..self.m)
                .map(|k| self.mask(j, k).as_char().to_string())
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path, mask_path: &Path) -> Result<(), ForwardError> {
        std::fs::write(path, self.to_csv())?;
        std::fs::write(mask_path, self.mask_to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str, mask_text: &str) -> Result<MeasurementMatrix, ForwardError> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .enumerate()
            .map(|(ln, line)| {
                line.split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|_| ForwardError::Parse {
                            line: ln + 1,
                            msg: format!("bad number {v:?}"),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(ForwardError::Parse {
                line: 0,
                msg: "matrix is not square".into(),
            });
        }
        let entries = DMatrix::from_fn(m, m, |j, k| rows[j][k]);
        let mut mask = Vec::with_capacity(m * m);
        for (ln, line) in mask_text.lines().enumerate() {
            for v in line.split(',') {
                let c = v.trim().chars().next().unwrap_or(' ');
                mask.push(EntryKind::from_char(c).ok_or_else(|| ForwardError::Parse {
                    line: ln + 1,
                    msg: format!("bad mask entry {v:?}"),
                })?);
            }
        }
        if mask.len() != m * m {
            return Err(ForwardError::Parse {
                line: 0,
                msg: format!("mask has {} entries for a {m}x{m} matrix", mask.len()),
            });
        }
        Ok(MeasurementMatrix { m, entries, mask })
    }

    pub fn read_csv(path: &Path, mask_path: &Path) -> Result<MeasurementMatrix, ForwardError> {
        let text = std::fs::read_to_string(path)?;
        let mask = std::fs::read_to_string(mask_path)?;
        Self::from_csv(&text, &mask)
    }
}

/// Solves the shunt-model problem for one drive pattern.
pub fn solve_drive(
    mesh: &Mesh,
    layout: &ElectrodeLayout,
    sigma: &ConductivityField,
    pattern: &DrivePattern,
) -> Result<PotentialField, ForwardError> {
    pattern.validate(layout.m)?;
    let system = ShuntSystem::new(mesh, layout, sigma)?;
    let sol = system.solve(&pattern.currents)?;
    Ok(PotentialField {
        nodal: sol.nodal,
        electrode_potentials: sol.electrode_potentials,
        solve_residual: sol.residual,
    })
}

/// Simulates the full adjacent-adjacent measurement matrix `U(σ)`.
pub fn measure(
    mesh: &Mesh,
    layout: &ElectrodeLayout,
    sigma: &ConductivityField,
) -> Result<MeasurementMatrix, ForwardError> {
    Ok(measure_with_potentials(mesh, layout, sigma)?.0)
}

/// Like [`measure`], also returning the nodal potentials of each drive
/// (needed by the sensitivity assembly).
pub fn measure_with_potentials(
    mesh: &Mesh,
    layout: &ElectrodeLayout,
    sigma: &ConductivityField,
) -> Result<(MeasurementMatrix, Vec<PotentialField>), ForwardError> {
    let m = layout.m;
    let system = ShuntSystem::new(mesh, layout, sigma)?;
    let solutions: Vec<Result<PotentialField, ForwardError>> = exec::collect_indexed(m, |k| {
        let pattern = DrivePattern::adjacent(k, m);
        let sol = system.solve(&pattern.currents)?;
        Ok(PotentialField {
            nodal: sol.nodal,
            electrode_potentials: sol.electrode_potentials,
            solve_residual: sol.residual,
        })
    });
    let potentials: Vec<PotentialField> = solutions.into_iter().collect::<Result<_, _>>()?;

    let entries = DMatrix::from_fn(m, m, |j, k| {
        let u = &potentials[k].electrode_potentials;
        u[j] - u[(j + 1) % m]
    });
    let mask = (0..m * m)
        .map(|idx| {
            let (j, k) = (idx / m, idx % m);
            if crate::cyclic_distance(j, k, m) <= 1 {
                EntryKind::CurrentDriven
            } else {
                EntryKind::Measured
            }
        })
        .collect();
    Ok((MeasurementMatrix::new(entries, mask), potentials))
}

/// Difference measurement `V = U(σ) − U(σ0)` on a shared mesh and layout.
pub fn difference_measurement(
    mesh: &Mesh,
    layout: &ElectrodeLayout,
    sigma: &ConductivityField,
    sigma0: &ConductivityField,
) -> Result<MeasurementMatrix, ForwardError> {
    let u = measure(mesh, layout, sigma)?;
    let u0 = measure(mesh, layout, sigma0)?;
    u.difference(&u0)
}
