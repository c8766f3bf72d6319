//! Piecewise-linear FEM core for the shunt model.
//!
//! The shunt condition (potential constant on each electrode) is imposed by
//! collapsing all nodes of an electrode into one master unknown; the drive
//! current enters the right-hand side on that unknown. One electrode is
//! grounded during the solve and the gauge is fixed afterwards by the caller.

use nalgebra::DMatrix;
use nalgebra_sparse::{factorization::CscCholesky, CooMatrix, CscMatrix};

use crate::forward::{ConductivityField, ForwardError};
use crate::geometry::{ElectrodeLayout, Mesh};

#[derive(Debug, Clone, Copy)]
enum Dof {
    Free(usize),
    Grounded,
}

/// Assembled, factorized shunt-model system for one (mesh, layout, σ).
pub(crate) struct ShuntSystem {
    node_dof: Vec<Dof>,
    /// Reduced-system index of each electrode master unknown; `None` for the
    /// grounded electrode.
    electrode_dof: Vec<Option<usize>>,
    stiffness: CscMatrix<f64>,
    chol: CscCholesky<f64>,
    n_dof: usize,
}

pub(crate) struct NodalSolution {
    /// Gauge-fixed nodal potentials.
    pub nodal: Vec<f64>,
    /// Gauge-fixed electrode potentials (sum to zero).
    pub electrode_potentials: Vec<f64>,
    /// Relative residual of the constrained linear solve.
    pub residual: f64,
}

impl ShuntSystem {
    pub fn new(
        mesh: &Mesh,
        layout: &ElectrodeLayout,
        sigma: &ConductivityField,
    ) -> Result<Self, ForwardError> {
        if sigma.values().len() != mesh.triangle_count() {
            return Err(ForwardError::ConductivityLengthMismatch {
                expected: mesh.triangle_count(),
                got: sigma.values().len(),
            });
        }

        let n = mesh.node_count();
        let m = layout.m;

        // electrode membership per node
        let mut node_electrode: Vec<Option<usize>> = vec![None; n];
        for l in 0..m {
            for node in layout.electrode_nodes(mesh, l) {
                node_electrode[node] = Some(l);
            }
        }

        // dof numbering: free interior/gap nodes first, then electrode
        // masters for electrodes 1..m (electrode 0 grounded)
        let mut node_dof = vec![Dof::Grounded; n];
        let mut next = 0usize;
        for v in 0..n {
            if node_electrode[v].is_none() {
                node_dof[v] = Dof::Free(next);
                next += 1;
            }
        }
        let mut electrode_dof: Vec<Option<usize>> = vec![None; m];
        for l in 1..m {
            electrode_dof[l] = Some(next);
            next += 1;
        }
        let n_dof = next;
        for v in 0..n {
            if let Some(l) = node_electrode[v] {
                node_dof[v] = match electrode_dof[l] {
                    Some(d) => Dof::Free(d),
                    None => Dof::Grounded,
                };
            }
        }

        // assemble σ-weighted stiffness with electrode nodes collapsed
        let mut coo = CooMatrix::new(n_dof, n_dof);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.triangle_area(t);
            let grads = hat_gradients(mesh, t);
            let w = sigma.values()[t] * area;
            for i in 0..3 {
                let Dof::Free(di) = node_dof[tri[i]] else { continue };
                for j in 0..3 {
                    let Dof::Free(dj) = node_dof[tri[j]] else { continue };
                    let k = w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    coo.push(di, dj, k);
                }
            }
        }
        let stiffness = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&stiffness).map_err(|e| ForwardError::SingularSystem {
            details: format!("{e:?} (n_dof = {n_dof})"),
        })?;

        Ok(ShuntSystem {
            node_dof,
            electrode_dof,
            stiffness,
            chol,
            n_dof,
        })
    }

    /// Solves for the given electrode currents and fixes the gauge so the
    /// electrode potentials sum to zero.
    pub fn solve(&self, currents: &[f64]) -> Result<NodalSolution, ForwardError> {
        let m = self.electrode_dof.len();
        let mut rhs = DMatrix::zeros(self.n_dof, 1);
        for l in 0..m {
            if let Some(d) = self.electrode_dof[l] {
                rhs[(d, 0)] += currents[l];
            }
        }
        let x = self.chol.solve(&rhs);

        let residual_vec = &self.stiffness * &x - &rhs;
        let rhs_norm = rhs.norm();
        let residual = if rhs_norm == 0.0 {
            residual_vec.norm()
        } else {
            residual_vec.norm() / rhs_norm
        };
        if residual > 1e-10 {
            return Err(ForwardError::ResidualTooLarge { residual });
        }

        let mut electrode_potentials: Vec<f64> = (0..m)
            .map(|l| self.electrode_dof[l].map(|d| x[d]).unwrap_or(0.0))
            .collect();
        let shift = electrode_potentials.iter().sum::<f64>() / m as f64;

        let nodal: Vec<f64> = self
            .node_dof
            .iter()
            .map(|d| match d {
                Dof::Free(i) => x[*i] - shift,
                Dof::Grounded => -shift,
            })
            .collect();
        for p in electrode_potentials.iter_mut() {
            *p -= shift;
        }
        Ok(NodalSolution {
            nodal,
            electrode_potentials,
            residual,
        })
    }
}

/// Gradients of the three P1 hat functions on triangle `t` (constant per
/// element).
pub(crate) fn hat_gradients(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
    let two_area = 2.0 * mesh.triangle_area(t);
    [
        [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
        [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
        [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
    ]
}

/// Piecewise-constant gradient of a nodal field on every triangle.
pub(crate) fn element_gradients(mesh: &Mesh, nodal: &[f64]) -> Vec<[f64; 2]> {
    (0..mesh.triangle_count())
        .map(|t| {
            let tri = mesh.triangles[t];
            let grads = hat_gradients(mesh, t);
            let mut g = [0.0, 0.0];
            for i in 0..3 {
                g[0] += nodal[tri[i]] * grads[i][0];
                g[1] += nodal[tri[i]] * grads[i][1];
            }
            g
        })
        .collect()
}

/// Discrete boundary flux through electrode `l`: row sum of the full
/// (uncollapsed) stiffness matrix applied to the nodal solution, restricted
/// to the electrode's nodes. Equals the driven current for the FEM solution.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn electrode_flux(
    mesh: &Mesh,
    layout: &ElectrodeLayout,
    sigma: &ConductivityField,
    nodal: &[f64],
    l: usize,
) -> f64 {
    let nodes = layout.electrode_nodes(mesh, l);
    let mut flux = vec![0.0; mesh.node_count()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        let grads = hat_gradients(mesh, t);
        let w = sigma.values()[t] * area;
        for i in 0..3 {
            for j in 0..3 {
                flux[tri[i]] +=
                    w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]) * nodal[tri[j]];
            }
        }
    }
    nodes.iter().map(|&v| flux[v]).sum()
}

#[allow(dead_code)]
pub(crate) fn dense_from_csc(m: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplet_iter() {
        out[(i, j)] += v;
    }
    out
}
