//! Difference electrical impedance tomography (EIT) on the unit disk.
//!
//! The crate simulates adjacent-adjacent voltage measurements with a
//! finite-element shunt-model solver, interpolates the (unreliable) voltages
//! on current-driven electrodes either linearly or with a geometry-specific
//! method driven by the sensitivity matrix, and reconstructs the support of a
//! conductivity change with a monotonicity-based indicator.
//!
//! Modules follow the pipeline order:
//!
//! * [`geometry`] — disk triangulation, electrode arcs, pixel partitions and
//!   support bounds;
//! * [`forward`] — shunt-model FEM solves and measurement matrices;
//! * [`sensitivity`] — per-pixel sensitivity matrices `S_i`, the bound matrix
//!   `S_B` and the reduced linearized system;
//! * [`interpolate`] — linear and geometric interpolation of the masked
//!   current-driven entries;
//! * [`reconstruct`] — noise model, matrix absolute value, monotonicity
//!   indicator and a Tikhonov-regularized linearized baseline;
//! * [`harness`] — phantoms, experiment configs, error tables and run export.
//!
//! With the default `parallel` feature, drive solves and per-pixel work run on
//! rayon; without it everything falls back to sequential loops.

pub mod forward;
pub mod geometry;
pub mod harness;
pub mod interpolate;
pub mod linalg;
pub mod reconstruct;
pub mod sensitivity;

mod exec;
mod fem;

/// Cyclic distance between electrode indices `j` and `k` modulo `m`.
///
/// Entries of the measurement matrix with cyclic distance at most 1 are
/// voltages on current-driven electrodes.
pub fn cyclic_distance(j: usize, k: usize, m: usize) -> usize {
    let d = ((j % m) + m - (k % m)) % m;
    d.min(m - d)
}

/// Wraps an arbitrary (possibly out-of-range) electrode index into `0..m`.
pub fn cyclic_index(i: isize, m: usize) -> usize {
    let m = m as isize;
    (((i % m) + m) % m) as usize
}
