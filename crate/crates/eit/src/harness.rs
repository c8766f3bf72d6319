//! Experiment orchestration: the three-inclusion phantom, flat key=value
//! configs, error tables over electrode counts, the reconstruction-figure
//! pipeline, and hashed artifact export for reproducible runs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::forward::{self, ConductivityField, MeasurementMatrix};
use crate::geometry::{self, ElectrodeLayout, Mesh, PixelPartition};
use crate::interpolate;
use crate::reconstruct::{self, IndicatorField, NoiseSpec};
use crate::sensitivity::{self, SensitivityTensor};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("forward and reconstruction refinement are both {0}; distinct meshes are required to avoid testing the inversion on its own discretization")]
    InverseCrime(u32),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Forward(#[from] forward::ForwardError),
    #[error(transparent)]
    Sensitivity(#[from] sensitivity::SensitivityError),
    #[error(transparent)]
    Interpolate(#[from] interpolate::InterpolateError),
    #[error(transparent)]
    Reconstruct(#[from] reconstruct::ReconstructError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// Phantom geometry: a half-elliptical inclusion in the upper left plus two
// circular inclusions. All three sit well inside the 0.7-radius ball, so
// every support-bound radius in {0.7, 0.8, 0.9} is valid a priori.
pub const D1_CENTER: [f64; 2] = [-0.25, 0.25];
pub const D1_SEMI_AXES: [f64; 2] = [0.30, 0.35];
pub const D2_CENTER: [f64; 2] = [0.40, 0.15];
pub const D2_RADIUS: f64 = 0.15;
pub const D3_CENTER: [f64; 2] = [0.10, -0.40];
pub const D3_RADIUS: f64 = 0.12;

fn in_half_ellipse(p: [f64; 2]) -> bool {
    let dx = (p[0] - D1_CENTER[0]) / D1_SEMI_AXES[0];
    let dy = (p[1] - D1_CENTER[1]) / D1_SEMI_AXES[1];
    p[1] >= D1_CENTER[1] && dx * dx + dy * dy <= 1.0
}

fn in_disk(p: [f64; 2], c: [f64; 2], r: f64) -> bool {
    let dx = p[0] - c[0];
    let dy = p[1] - c[1];
    dx * dx + dy * dy <= r * r
}

pub fn in_inclusion(p: [f64; 2]) -> bool {
    in_half_ellipse(p) || in_disk(p, D2_CENTER, D2_RADIUS) || in_disk(p, D3_CENTER, D3_RADIUS)
}

/// Centroids of the three inclusions (half-ellipse centroid sits at
/// `4b/(3π)` above its flat side).
pub fn inclusion_centroids() -> [[f64; 2]; 3] {
    [
        [
            D1_CENTER[0],
            D1_CENTER[1] + 4.0 * D1_SEMI_AXES[1] / (3.0 * std::f64::consts::PI),
        ],
        D2_CENTER,
        D3_CENTER,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomId {
    /// σ0 plus one unit of conductivity on each of the three inclusions.
    ThreeInclusions,
    /// σ ≡ σ0: no conductivity change at all.
    Homogeneous,
}

impl FromStr for PhantomId {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "three-inclusions" => Ok(PhantomId::ThreeInclusions),
            "homogeneous" => Ok(PhantomId::Homogeneous),
            other => Err(HarnessError::Config(format!("unknown phantom `{other}`"))),
        }
    }
}

impl fmt::Display for PhantomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomId::ThreeInclusions => "three-inclusions",
            PhantomId::Homogeneous => "homogeneous",
        })
    }
}

/// Conductivity of a phantom on `mesh`: inclusion membership is decided by
/// element centroid.
pub fn phantom_conductivity(
    mesh: &Mesh,
    phantom: PhantomId,
    sigma0: f64,
) -> Result<ConductivityField, HarnessError> {
    let values = (0..mesh.triangle_count())
        .map(|t| {
            let c = mesh.triangle_centroid(t);
            let bump = match phantom {
                PhantomId::ThreeInclusions if in_inclusion(c) => 1.0,
                _ => 0.0,
            };
            sigma0 + bump
        })
        .collect();
    Ok(ConductivityField::new(values, format!("{phantom} phantom, sigma0 = {sigma0}"))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Linear,
    Geometric,
}

impl FromStr for Method {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "linear" => Ok(Method::Linear),
            "geometric" => Ok(Method::Geometric),
            other => Err(HarnessError::Config(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Linear => "linear",
            Method::Geometric => "geometric",
        })
    }
}

/// Flat key=value experiment configuration. Every field has a default; a
/// config file or CLI flags override individual keys.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Electrode counts; tables iterate over all, single runs use the last.
    pub ms: Vec<usize>,
    pub forward_refinement: u32,
    pub recon_refinement: u32,
    pub phantom: PhantomId,
    pub sigma0: f64,
    /// Noise level for single reconstruction runs.
    pub delta: f64,
    /// Noise levels of the figure rows.
    pub figure_deltas: Vec<f64>,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub radii: Vec<f64>,
    pub coverage: f64,
    pub symmetrize_noise: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ms: vec![16, 24, 32],
            forward_refinement: 4,
            recon_refinement: 3,
            phantom: PhantomId::ThreeInclusions,
            sigma0: 1.0,
            delta: 1e-3,
            figure_deltas: vec![1e-5, 1e-3],
            seed: 7,
            methods: vec![Method::Linear, Method::Geometric],
            radii: vec![0.7, 0.8, 0.9],
            coverage: 0.5,
            symmetrize_noise: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Applies `key=value` lines (blank lines and `#` comments skipped) on
    /// top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("expected key=value: `{line}`")))?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn list(v: &str) -> impl Iterator<Item = &str> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty())
        }
        let bad = |e: &dyn fmt::Display| HarnessError::Config(format!("{key}={value}: {e}"));
        match key {
            "m" => self.ms = list(value).map(|s| s.parse().map_err(|e| bad(&e))).collect::<Result<_, _>>()?,
            "forward_refinement" => self.forward_refinement = value.parse().map_err(|e| bad(&e))?,
            "recon_refinement" => self.recon_refinement = value.parse().map_err(|e| bad(&e))?,
            "phantom" => self.phantom = value.parse()?,
            "sigma0" => self.sigma0 = value.parse().map_err(|e| bad(&e))?,
            "delta" => self.delta = value.parse().map_err(|e| bad(&e))?,
            "figure_deltas" => self.figure_deltas = list(value).map(|s| s.parse().map_err(|e| bad(&e))).collect::<Result<_, _>>()?,
            "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
            "methods" => self.methods = list(value).map(Method::from_str).collect::<Result<_, _>>()?,
            "radii" => self.radii = list(value).map(|s| s.parse().map_err(|e| bad(&e))).collect::<Result<_, _>>()?,
            "coverage" => self.coverage = value.parse().map_err(|e| bad(&e))?,
            "symmetrize_noise" => self.symmetrize_noise = value.parse().map_err(|e| bad(&e))?,
            "out" => self.out_dir = PathBuf::from(value),
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.ms.is_empty() {
            return Err(HarnessError::Config("no electrode counts given".into()));
        }
        if let Some(&m) = self.ms.iter().find(|&&m| m < 5) {
            return Err(HarnessError::Config(format!("m = {m} < 5")));
        }
        if let Some(&r) = self.radii.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
            return Err(HarnessError::Config(format!("bound radius {r} outside (0,1)")));
        }
        if self.forward_refinement == self.recon_refinement {
            return Err(HarnessError::InverseCrime(self.forward_refinement));
        }
        if !(self.sigma0 > 0.0) {
            return Err(HarnessError::Config(format!("sigma0 = {} not positive", self.sigma0)));
        }
        if self.delta < 0.0 || self.figure_deltas.iter().any(|&d| d < 0.0) {
            return Err(HarnessError::Config("negative noise level".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no interpolation methods given".into()));
        }
        Ok(())
    }

    /// Full effective configuration, echoed into run manifests.
    pub fn echo(&self) -> String {
        let join_f = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        s.push_str(&format!(
            "m={}\n",
            self.ms.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        ));
        s.push_str(&format!("forward_refinement={}\n", self.forward_refinement));
        s.push_str(&format!("recon_refinement={}\n", self.recon_refinement));
        s.push_str(&format!("phantom={}\n", self.phantom));
        s.push_str(&format!("sigma0={}\n", self.sigma0));
        s.push_str(&format!("delta={}\n", self.delta));
        s.push_str(&format!("figure_deltas={}\n", join_f(&self.figure_deltas)));
        s.push_str(&format!("seed={}\n", self.seed));
        s.push_str(&format!(
            "methods={}\n",
            self.methods.iter().map(Method::to_string).collect::<Vec<_>>().join(",")
        ));
        s.push_str(&format!("radii={}\n", join_f(&self.radii)));
        s.push_str(&format!("coverage={}\n", self.coverage));
        s.push_str(&format!("symmetrize_noise={}\n", self.symmetrize_noise));
        s.push_str(&format!("out={}\n", self.out_dir.display()));
        s
    }

    /// Angular offset of the reconstruction mesh for electrode count `m`: a
    /// third of the electrode spacing, so no element edge coincides with the
    /// forward mesh.
    pub fn recon_offset(&self, m: usize) -> f64 {
        std::f64::consts::TAU / (3.0 * m as f64)
    }
}

/// Relative Frobenius interpolation errors, rows keyed by method (and bound
/// radius), columns by electrode count.
#[derive(Debug, Clone)]
pub struct ErrorTable {
    pub ms: Vec<usize>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ErrorTable {
    pub fn get(&self, label: &str, m: usize) -> Option<f64> {
        let col = self.ms.iter().position(|&x| x == m)?;
        let (_, vals) = self.rows.iter().find(|(l, _)| l == label)?;
        Some(vals[col])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method");
        for m in &self.ms {
            s.push_str(&format!(",m={m}"));
        }
        s.push('\n');
        for (label, vals) in &self.rows {
            s.push_str(label);
            for v in vals {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// One simulated scene: forward data on the fine mesh, sensitivity and
/// pixels on the offset reconstruction mesh.
pub struct Scene {
    pub m: usize,
    pub forward_mesh: Mesh,
    pub forward_layout: ElectrodeLayout,
    pub recon_mesh: Mesh,
    pub recon_layout: ElectrodeLayout,
    pub partition: PixelPartition,
    pub sensitivity: SensitivityTensor,
    pub v_true: MeasurementMatrix,
}

pub fn build_scene(config: &ExperimentConfig, m: usize) -> Result<Scene, HarnessError> {
    config.validate()?;
    let (forward_mesh, forward_layout) =
        geometry::build_disk_mesh(config.forward_refinement, m, config.coverage)?;
    let (recon_mesh, recon_layout) = geometry::build_disk_mesh_with_offset(
        config.recon_refinement,
        m,
        config.coverage,
        config.recon_offset(m),
    )?;
    let partition = geometry::build_pixel_partition(&recon_mesh);

    let sigma = phantom_conductivity(&forward_mesh, config.phantom, config.sigma0)?;
    let sigma0 = ConductivityField::constant(&forward_mesh, config.sigma0, "reference")?;
    let v_true = forward::difference_measurement(&forward_mesh, &forward_layout, &sigma, &sigma0)?;

    let sigma0_recon = ConductivityField::constant(&recon_mesh, config.sigma0, "reference")?;
    let sensitivity =
        sensitivity::assemble_sensitivity(&recon_mesh, &recon_layout, &partition, &sigma0_recon)?;

    Ok(Scene {
        m,
        forward_mesh,
        forward_layout,
        recon_mesh,
        recon_layout,
        partition,
        sensitivity,
        v_true,
    })
}

/// Interpolates the masked matrix with every configured method; returns
/// labelled results.
pub fn interpolate_all(
    scene: &Scene,
    config: &ExperimentConfig,
    masked: &MeasurementMatrix,
) -> Result<Vec<(String, MeasurementMatrix)>, HarnessError> {
    let mut out = Vec::new();
    for &method in &config.methods {
        match method {
            Method::Linear => {
                out.push(("linear".to_string(), interpolate::linear_interpolate(masked)?));
            }
            Method::Geometric => {
                for &r in &config.radii {
                    let bound = geometry::support_bound(&scene.recon_mesh, &scene.partition, r)?;
                    let bm = sensitivity::bound_matrix(&scene.sensitivity, &bound)?;
                    out.push((
                        format!("geometric r={r}"),
                        interpolate::geometric_interpolate(masked, &bm)?,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Noiseless interpolation-error table over all configured electrode counts.
pub fn run_table1(config: &ExperimentConfig) -> Result<ErrorTable, HarnessError> {
    config.validate()?;
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for &m in &config.ms {
        let scene = build_scene(config, m)?;
        let masked = interpolate::mask_current_driven(&scene.v_true);
        for (label, filled) in interpolate_all(&scene, config, &masked)? {
            let err = interpolate::interpolation_error(&scene.v_true, &filled)?;
            match rows.iter_mut().find(|(l, _)| *l == label) {
                Some((_, vals)) => vals.push(err),
                None => rows.push((label, vec![err])),
            }
        }
    }
    Ok(ErrorTable { ms: config.ms.clone(), rows })
}

/// One panel of the reconstruction figure.
pub struct FigurePanel {
    pub delta: f64,
    pub label: String,
    pub field: IndicatorField,
    pub svg: String,
    /// Fraction of pixels agreeing with the full-data panel at the 25%
    /// threshold; 1.0 for the full-data panel itself.
    pub overlap_with_full: f64,
    pub jaccard_with_full: f64,
    pub note: Option<String>,
}

pub struct FigureRun {
    pub m: usize,
    pub scene: Scene,
    pub panels: Vec<FigurePanel>,
}

/// Runs the reconstruction pipeline at the largest configured electrode
/// count: for each noise level, indicators from the full noisy matrix and
/// from each interpolation of the masked matrix.
pub fn run_reconstruction_figure(config: &ExperimentConfig) -> Result<FigureRun, HarnessError> {
    config.validate()?;
    let m = *config.ms.iter().max().expect("validated nonempty");
    let scene = build_scene(config, m)?;
    let mut panels = Vec::new();

    for (row, &delta) in config.figure_deltas.iter().enumerate() {
        let spec = NoiseSpec {
            delta,
            seed: config.seed.wrapping_add(row as u64),
            symmetrize: config.symmetrize_noise,
        };
        let noisy = reconstruct::add_noise(&scene.v_true, spec)?;
        let masked = interpolate::mask_current_driven(&noisy);

        let mut sources = vec![("full".to_string(), noisy.clone())];
        sources.extend(interpolate_all(&scene, config, &masked)?);

        let mut full_mask: Option<Vec<bool>> = None;
        for (label, data) in sources {
            let (field, note) = if data.frobenius() == 0.0 {
                (
                    IndicatorField::zero(&scene.partition),
                    Some("no change detected".to_string()),
                )
            } else {
                (
                    reconstruct::beta_indicator(&data, &scene.sensitivity, delta, &scene.partition)?,
                    None,
                )
            };
            let mask = field.threshold_mask(0.25);
            let (overlap, jaccard) = match &full_mask {
                None => {
                    full_mask = Some(mask);
                    (1.0, 1.0)
                }
                Some(fm) => (reconstruct::mask_overlap(fm, &mask), reconstruct::jaccard(fm, &mask)),
            };
            let svg = reconstruct::render_svg(&scene.recon_mesh, &scene.partition, &field);
            panels.push(FigurePanel {
                delta,
                label,
                field,
                svg,
                overlap_with_full: overlap,
                jaccard_with_full: jaccard,
                note,
            });
        }
    }
    Ok(FigureRun { m, scene, panels })
}

/// Number of inclusion centroids whose pixel is above the 25% threshold.
pub fn centroids_above_threshold(
    field: &IndicatorField,
    mesh: &Mesh,
    partition: &PixelPartition,
) -> usize {
    let mask = field.threshold_mask(0.25);
    inclusion_centroids()
        .iter()
        .filter(|&&c| partition.locate(mesh, c).map(|i| mask[i]).unwrap_or(false))
        .count()
}

/// Collects run artifacts under one directory and writes a manifest of
/// SHA-256 hashes; byte-identical reruns produce byte-identical manifests.
pub struct Exporter {
    dir: PathBuf,
    entries: Vec<(String, String)>,
}

impl Exporter {
    pub fn new(dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir)?;
        Ok(Exporter { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        std::fs::write(self.dir.join(name), bytes)?;
        let hash = hex::encode(Sha256::digest(bytes));
        self.entries.push((name.to_string(), hash));
        Ok(())
    }

    pub fn manifest(&self) -> String {
        let mut sorted = self.entries.clone();
        sorted.sort();
        let mut s = String::new();
        for (name, hash) in &sorted {
            s.push_str(&format!("{hash}  {name}\n"));
        }
        s
    }

    /// Writes the manifest and returns its own hash.
    pub fn finish(self) -> Result<String, HarnessError> {
        let manifest = self.manifest();
        std::fs::write(self.dir.join("MANIFEST.txt"), &manifest)?;
        Ok(hex::encode(Sha256::digest(manifest.as_bytes())))
    }
}
