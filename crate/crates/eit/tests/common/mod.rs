//! Independently coded numerical oracles used by the integration tests.
//! Everything here deliberately avoids the library's own linear-algebra
//! paths: eigendecompositions use a hand-written cyclic Jacobi sweep and
//! linear systems use hand-written Gaussian elimination, so agreement with
//! the library is a genuine cross-check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix: returns
/// (eigenvalues, orthogonal Q) with A = Q diag(vals) Qᵀ.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut q = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for r in (p + 1)..n {
                off += m[(p, r)] * m[(p, r)];
            }
        }
        if off.sqrt() <= 1e-14 * m.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = m[(p, r)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/columns p and r
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkr = m[(k, r)];
                    m[(k, p)] = c * mkp - s * mkr;
                    m[(k, r)] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mrk = m[(r, k)];
                    m[(p, k)] = c * mpk - s * mrk;
                    m[(r, k)] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }
    let vals = (0..n).map(|i| m[(i, i)]).collect();
    (vals, q)
}

pub fn jacobi_min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let (vals, _) = jacobi_eigen(a);
    vals.into_iter().fold(f64::INFINITY, f64::min)
}

/// Pseudoinverse of a symmetric matrix through the Jacobi path, dropping
/// eigenvalues below `rel_cutoff` times the largest magnitude.
pub fn jacobi_pseudoinverse(a: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (vals, q) = jacobi_eigen(a);
    let max = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let n = a.nrows();
    let mut d = DMatrix::zeros(n, n);
    for (i, &v) in vals.iter().enumerate() {
        if v.abs() > rel_cutoff * max {
            d[(i, i)] = 1.0 / v;
        }
    }
    &q * d * q.transpose()
}

/// Gaussian elimination with partial pivoting; panics on a singular system.
pub fn gauss_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        assert!(m[(pivot, col)].abs() > 1e-300, "singular system in oracle");
        if pivot != col {
            m.swap_rows(pivot, col);
            x.swap_rows(pivot, col);
        }
        for row in (col + 1)..n {
            let f = m[(row, col)] / m[(col, col)];
            for k in col..n {
                m[(row, k)] -= f * m[(col, k)];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= m[(col, col)];
        for row in 0..col {
            x[row] -= m[(row, col)] * x[col];
        }
    }
    x
}

/// Largest β ≥ 0 with β·S + M ⪰ 0, found by bracketing and bisecting the
/// definiteness predicate (smallest eigenvalue via the Jacobi path).
pub fn bisection_beta(s: &DMatrix<f64>, m_reg: &DMatrix<f64>) -> f64 {
    let feasible = |beta: f64| jacobi_min_eigenvalue(&(s * beta + m_reg)) >= 0.0;
    assert!(feasible(0.0), "regularized matrix not PSD");
    let mut hi = 1.0;
    let mut lo = 0.0;
    for _ in 0..200 {
        if !feasible(hi) {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    assert!(!feasible(hi), "sensitivity block numerically zero");
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Equality-constrained quadratic-program oracle for the geometric
/// interpolation. Unknowns x = [w_0..w_{m-1}, d_0..d_{m-1}] parametrize the
/// symmetric band (w_j = V_{j-1,j}, d_j = V_{jj}); the objective
/// −tr(V(x)ᵀ P V(x)) is minimized subject to the zero-column-sum
/// constraints, by solving the KKT system with Gaussian elimination.
/// Returns the filled matrix.
pub fn kkt_geometric_oracle(
    v_known: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let m = v_known.nrows();
    let dist = |j: usize, k: usize| {
        let d = (j + m - k) % m;
        d.min(m - d)
    };
    // V(x) = v0 + Σ_i x_i B_i
    let mut v0 = v_known.clone();
    for j in 0..m {
        for k in 0..m {
            if dist(j, k) <= 1 {
                v0[(j, k)] = 0.0;
            }
        }
    }
    let mut basis = Vec::with_capacity(2 * m);
    for j in 0..m {
        let mut b = DMatrix::zeros(m, m);
        let jm1 = (j + m - 1) % m;
        b[(jm1, j)] = 1.0;
        b[(j, jm1)] = 1.0;
        basis.push(b);
    }
    for j in 0..m {
        let mut b = DMatrix::zeros(m, m);
        b[(j, j)] = 1.0;
        basis.push(b);
    }

    // objective −tr(V(x)ᵀ P V(x)) = xᵀHx + 2gᵀx + const
    let n = 2 * m;
    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let pbi = p * &basis[i];
        for j in 0..n {
            h[(i, j)] = -(basis[j].transpose() * &pbi).trace();
        }
        g[i] = -(v0.transpose() * &pbi).trace();
    }

    // constraints: d_k + w_k + w_{k+1} = −s_k with s_k the known column sum
    let mut a_eq = DMatrix::zeros(m, n);
    let mut b_eq = DVector::zeros(m);
    for k in 0..m {
        a_eq[(k, m + k)] = 1.0;
        a_eq[(k, k)] += 1.0;
        a_eq[(k, (k + 1) % m)] += 1.0;
        b_eq[k] = -(0..m).map(|j| v0[(j, k)]).sum::<f64>();
    }

    // KKT: [2H A_eqᵀ; A_eq 0] [x; λ] = [−2g; b_eq]
    let mut kkt = DMatrix::zeros(n + m, n + m);
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = 2.0 * h[(i, j)];
        }
        rhs[i] = -2.0 * g[i];
    }
    for c in 0..m {
        for j in 0..n {
            kkt[(n + c, j)] = a_eq[(c, j)];
            kkt[(j, n + c)] = a_eq[(c, j)];
        }
        rhs[n + c] = b_eq[c];
    }
    let sol = gauss_solve(&kkt, &rhs);

    let mut filled = v0.clone();
    for (i, b) in basis.iter().enumerate() {
        filled += b * sol[i];
    }
    filled
}
