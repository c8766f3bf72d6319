//! Monotonicity-based reconstruction from (possibly interpolated) difference
//! data, plus a Tikhonov-regularized linearized baseline.
//!
//! The per-pixel indicator is
//! `β_i = max{β ≥ 0 : β·S_i ⪰ −(|V_δ| + δ‖V_δ‖_F·I)}`, evaluated in closed
//! form as `−1/λ₁(A⁻¹ S_i A⁻¹)` where `A` is the symmetric PSD square root
//! of the regularized data matrix. Pixels inside a conductivity inclusion
//! keep large β; pixels outside drop toward zero.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exec;
use crate::forward::MeasurementMatrix;
use crate::geometry::{Mesh, PixelPartition};
use crate::linalg;
use crate::sensitivity::SensitivityTensor;

/// β for pixels whose sensitivity block is numerically zero is capped at
/// this multiple of the median nonzero β.
const BETA_CAP_FACTOR: f64 = 1e6;
/// λ₁ above this threshold counts as "numerically zero sensitivity".
const LAMBDA_ZERO_TOL: f64 = -1e-14;

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("regularized matrix singular (zero data and zero noise level)")]
    SingularRegularization,
    #[error("noise level must be nonnegative, got {0}")]
    NegativeNoise(f64),
    #[error("regularization weight must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("sensitivity tensor has m = {0} but the measurement has m = {1}")]
    DimensionMismatch(usize, usize),
    #[error("pixel count mismatch: {0} betas vs {1} centroids")]
    PixelMismatch(usize, usize),
    #[error("malformed indicator CSV: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Additive measurement noise: `V_δ = V + δ‖V‖_F·E/‖E‖_F` with E i.i.d.
/// uniform on [−1,1].
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    /// Relative noise level δ (e.g. 1e-3 for 0.1%).
    pub delta: f64,
    pub seed: u64,
    /// Symmetrize E before scaling. Off by default: the perturbed matrix is
    /// then slightly asymmetric, as raw measurement noise would be.
    pub symmetrize: bool,
}

impl NoiseSpec {
    pub fn new(delta: f64, seed: u64) -> Self {
        NoiseSpec { delta, seed, symmetrize: false }
    }
}

pub fn add_noise(
    v: &MeasurementMatrix,
    spec: NoiseSpec,
) -> Result<MeasurementMatrix, ReconstructError> {
    if spec.delta < 0.0 {
        return Err(ReconstructError::NegativeNoise(spec.delta));
    }
    if spec.delta == 0.0 {
        return Ok(v.clone());
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let m = v.m;
    let mut e = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    if spec.symmetrize {
        e = linalg::symmetrize(&e);
    }
    let scale = spec.delta * v.frobenius() / e.norm();
    let mut out = v.clone();
    out.entries += e * scale;
    Ok(out)
}

/// Matrix absolute value `|V| = Q|Λ|Qᵀ` of the symmetrized input; PSD.
pub fn matrix_abs(v: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::matrix_abs_sym(v)
}

/// Per-pixel monotonicity indicator on a fixed pixel partition.
#[derive(Debug, Clone)]
pub struct IndicatorField {
    pub betas: Vec<f64>,
    pub centroids: Vec<[f64; 2]>,
}

impl IndicatorField {
    /// All-zero field, used when the data carries no conductivity change.
    pub fn zero(partition: &PixelPartition) -> Self {
        IndicatorField {
            betas: vec![0.0; partition.r()],
            centroids: partition.centroids.clone(),
        }
    }

    pub fn max(&self) -> f64 {
        self.betas.iter().copied().fold(0.0, f64::max)
    }

    /// Pixels at or above `fraction` of the maximum β.
    pub fn threshold_mask(&self, fraction: f64) -> Vec<bool> {
        let cutoff = fraction * self.max();
        self.betas.iter().map(|&b| self.max() > 0.0 && b >= cutoff).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pixel_index,centroid_x,centroid_y,beta\n");
        for (i, (&b, c)) in self.betas.iter().zip(&self.centroids).enumerate() {
            out.push_str(&format!("{i},{},{},{b}\n", c[0], c[1]));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), ReconstructError> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    pub fn from_csv(text: &str) -> Result<Self, ReconstructError> {
        let mut betas = Vec::new();
        let mut centroids = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(ReconstructError::Parse(format!("expected 4 fields: {line}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| ReconstructError::Parse(format!("{s}: {e}")))
            };
            centroids.push([num(fields[1])?, num(fields[2])?]);
            betas.push(num(fields[3])?);
        }
        Ok(IndicatorField { betas, centroids })
    }
}

/// Jaccard index of two thresholded pixel masks.
pub fn jaccard(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 { 1.0 } else { inter as f64 / union as f64 }
}

/// Fraction of pixels on which two thresholded masks agree.
pub fn mask_overlap(a: &[bool], b: &[bool]) -> f64 {
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    agree as f64 / a.len() as f64
}

/// Computes the monotonicity indicator `β_i = −1/λ₁(A⁻¹ S_i A⁻¹)` for every
/// pixel, where `A² = |V_δ| + δ‖V_δ‖_F·I`. Pixels with numerically zero
/// sensitivity get a capped β so that renders stay finite.
pub fn beta_indicator(
    v_delta: &MeasurementMatrix,
    s: &SensitivityTensor,
    delta: f64,
    partition: &PixelPartition,
) -> Result<IndicatorField, ReconstructError> {
    if delta < 0.0 {
        return Err(ReconstructError::NegativeNoise(delta));
    }
    if s.m != v_delta.m {
        return Err(ReconstructError::DimensionMismatch(s.m, v_delta.m));
    }
    let reg = regularized_matrix(v_delta, delta);
    let w = linalg::inv_sqrt_spd(&reg)
        .map_err(|_| ReconstructError::SingularRegularization)?;

    let lambda1: Vec<f64> = exec::collect_indexed(s.r(), |i| {
        linalg::min_eigenvalue(&(&w * &s.pixel_matrices[i] * &w))
    });
    let mut nonzero: Vec<f64> = lambda1
        .iter()
        .filter(|&&l| l < LAMBDA_ZERO_TOL)
        .map(|&l| -1.0 / l)
        .collect();
    nonzero.sort_by(|a, b| a.total_cmp(b));
    let beta_max = if nonzero.is_empty() {
        0.0
    } else {
        BETA_CAP_FACTOR * nonzero[nonzero.len() / 2]
    };
    let betas = lambda1
        .iter()
        .map(|&l| if l < LAMBDA_ZERO_TOL { (-1.0 / l).min(beta_max) } else { beta_max })
        .collect();
    Ok(IndicatorField { betas, centroids: partition.centroids.clone() })
}

/// `|V_δ| + δ‖V_δ‖_F·I` — the positive-definite data matrix the indicator
/// tests against.
pub fn regularized_matrix(v_delta: &MeasurementMatrix, delta: f64) -> DMatrix<f64> {
    let m = v_delta.m;
    matrix_abs(&v_delta.entries) + DMatrix::identity(m, m) * (delta * v_delta.frobenius())
}

/// Tikhonov-regularized linearized reconstruction: solves
/// `(𝕊ᵀ𝕊 + α·I)·κ = 𝕊ᵀ𝕍` for the per-pixel conductivity update κ.
pub fn linearized_reconstruct(
    s_flat: &DMatrix<f64>,
    v_flat: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>, ReconstructError> {
    if alpha <= 0.0 {
        return Err(ReconstructError::NonPositiveAlpha(alpha));
    }
    let r = s_flat.ncols();
    let normal = s_flat.transpose() * s_flat + DMatrix::identity(r, r) * alpha;
    let rhs = s_flat.transpose() * v_flat;
    // SPD for alpha > 0, so plain Cholesky is exact enough here
    let chol = normal
        .cholesky()
        .ok_or(ReconstructError::NonPositiveAlpha(alpha))?;
    Ok(chol.solve(&rhs))
}

/// Renders the indicator field as an SVG heat map: pixels below 25% of the
/// maximum β are transparent, the color ramp saturates at 50%. A zero field
/// produces an empty disk annotated "no change detected".
pub fn render_svg(mesh: &Mesh, partition: &PixelPartition, field: &IndicatorField) -> String {
    const SIZE: f64 = 480.0;
    let px = |x: f64| (x + 1.1) / 2.2 * SIZE;
    let py = |y: f64| (1.1 - y) / 2.2 * SIZE;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    ));
    svg.push_str(&format!(
        "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"white\" stroke=\"black\"/>\n",
        px(0.0),
        py(0.0),
        SIZE / 2.2
    ));
    let max = field.max();
    if max <= 0.0 {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"20\">no change detected</text>\n",
            px(0.0),
            py(0.0)
        ));
        svg.push_str("</svg>\n");
        return svg;
    }
    for (i, tris) in partition.pixels.iter().enumerate() {
        let frac = field.betas[i] / max;
        if frac < 0.25 {
            continue;
        }
        // linear ramp from 25% to 50%, clipped above
        let t = ((frac - 0.25) / 0.25).min(1.0);
        let red = 255.0 - 127.0 * t;
        let other = 200.0 * (1.0 - t);
        let color = format!("rgb({},{},{})", red as u8, other as u8, other as u8);
        for &tri in tris {
            let [a, b, c] = mesh.triangles[tri];
            let pts: Vec<String> = [a, b, c]
                .iter()
                .map(|&n| format!("{:.2},{:.2}", px(mesh.nodes[n][0]), py(mesh.nodes[n][1])))
                .collect();
            svg.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{color}\" stroke=\"none\"/>\n",
                pts.join(" ")
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::EntryKind;
    use approx::assert_relative_eq;

    fn random_measurement(m: usize, seed: u64) -> MeasurementMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let sym = (&raw + raw.transpose()) * 0.5;
        MeasurementMatrix::new(sym, vec![EntryKind::Measured; m * m])
    }

    #[test]
    fn noise_has_exact_relative_magnitude() {
        let v = random_measurement(8, 7);
        for delta in [0.0, 1e-5, 1e-3, 0.1] {
            let noisy = add_noise(&v, NoiseSpec::new(delta, 42)).unwrap();
            let rel = (&noisy.entries - &v.entries).norm() / v.frobenius();
            assert_relative_eq!(rel, delta, epsilon = 1e-12);
        }
    }

    #[test]
    fn noise_is_deterministic_and_seed_sensitive() {
        let v = random_measurement(8, 7);
        let a = add_noise(&v, NoiseSpec::new(1e-3, 1)).unwrap();
        let b = add_noise(&v, NoiseSpec::new(1e-3, 1)).unwrap();
        let c = add_noise(&v, NoiseSpec::new(1e-3, 2)).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_ne!(a.entries, c.entries);
    }

    #[test]
    fn symmetrized_noise_stays_symmetric() {
        let v = random_measurement(8, 7);
        let mut spec = NoiseSpec::new(1e-2, 5);
        spec.symmetrize = true;
        let noisy = add_noise(&v, spec).unwrap();
        assert!(noisy.asymmetry() < 1e-14);
        let rel = (&noisy.entries - &v.entries).norm() / v.frobenius();
        assert_relative_eq!(rel, 1e-2, epsilon = 1e-12);
    }

    #[test]
    fn matrix_abs_basics() {
        let d = DMatrix::from_diagonal(&DVector::<f64>::from_vec(vec![2.0, -3.0]));
        let a = matrix_abs(&d);
        assert_relative_eq!(a[(0, 0)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(a[(1, 1)], 3.0, epsilon = 1e-14);
        assert!(a[(0, 1)].abs() < 1e-14);
        // |V|² = V² for symmetric V
        let v = random_measurement(6, 3).entries;
        let av = matrix_abs(&v);
        assert_relative_eq!(&av * &av, &v * &v, epsilon = 1e-8 * v.norm() * v.norm());
    }

    #[test]
    fn identity_case_beta_is_one() {
        // with |V_δ| + δ‖V_δ‖I = I and S = −I the definiteness flips at β = 1
        let w = DMatrix::<f64>::identity(4, 4);
        let s = -DMatrix::<f64>::identity(4, 4);
        let l1 = linalg::min_eigenvalue(&(&w * s * &w));
        assert_relative_eq!(-1.0 / l1, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn linearized_reconstruct_limits() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let s = DMatrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
        let zero = DVector::zeros(12);
        let k0 = linearized_reconstruct(&s, &zero, 1e-6).unwrap();
        assert_eq!(k0.norm(), 0.0);

        let v = DVector::from_fn(12, |i, _| (i as f64).sin());
        let mut prev = f64::INFINITY;
        for alpha in [1e-4, 1e-2, 1.0, 1e2, 1e4] {
            let k = linearized_reconstruct(&s, &v, alpha).unwrap();
            assert!(k.norm() < prev);
            prev = k.norm();
        }
        assert!(linearized_reconstruct(&s, &v, 0.0).is_err());
    }

    #[test]
    fn indicator_csv_roundtrip() {
        let field = IndicatorField {
            betas: vec![0.5, 1.25, 0.0],
            centroids: vec![[0.1, -0.2], [0.3, 0.4], [-0.5, 0.0]],
        };
        let parsed = IndicatorField::from_csv(&field.to_csv()).unwrap();
        assert_eq!(parsed.betas, field.betas);
        assert_eq!(parsed.centroids, field.centroids);
    }

    #[test]
    fn threshold_and_overlap_metrics() {
        let field = IndicatorField {
            betas: vec![1.0, 0.4, 0.1, 0.0],
            centroids: vec![[0.0; 2]; 4],
        };
        assert_eq!(field.threshold_mask(0.25), vec![true, true, false, false]);
        let a = vec![true, true, false, false];
        let b = vec![true, false, false, false];
        assert_relative_eq!(jaccard(&a, &b), 0.5);
        assert_relative_eq!(mask_overlap(&a, &b), 0.75);
        let zero = IndicatorField { betas: vec![0.0; 3], centroids: vec![[0.0; 2]; 3] };
        assert_eq!(zero.threshold_mask(0.25), vec![false; 3]);
    }

    #[test]
    fn negative_noise_rejected() {
        let v = random_measurement(6, 9);
        assert!(add_noise(&v, NoiseSpec::new(-0.1, 0)).is_err());
    }
}
