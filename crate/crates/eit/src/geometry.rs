//! Unit-disk triangulations, electrode layouts, pixel partitions and support
//! bounds.
//!
//! Meshes are built by uniform red refinement of a 16-sector fan of the unit
//! disk, with boundary edge midpoints snapped back onto the circle. Children
//! of a triangle are emitted consecutively, so the ancestor of triangle `t`
//! after `l` coarsening levels is simply `t / 4^l`; coarsened pixel
//! partitions rely on this. All types are immutable after construction.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Tolerance for "node lies on the unit circle".
pub const BOUNDARY_TOL: f64 = 1e-9;

const BASE_SECTORS: usize = 16;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(
        "mesh too coarse for {m} electrodes: refinement {refinement} leaves electrode {electrode} \
         with {edges} boundary edges (need at least 2, minimum refinement {min_refinement})"
    )]
    MeshTooCoarse {
        refinement: u32,
        m: usize,
        electrode: usize,
        edges: usize,
        min_refinement: u32,
    },
    #[error("electrode count must be at least 4, got {0}")]
    TooFewElectrodes(usize),
    #[error("coverage fraction must lie in (0,1), got {0}")]
    BadCoverage(f64),
    #[error("support radius must lie strictly in (0,1), got {0}")]
    BadSupportRadius(f64),
    #[error("coarsening level {level} exceeds refinement depth {depth}")]
    BadCoarseningLevel { level: u32, depth: u32 },
    #[error("triangle {0} has non-positive signed area")]
    DegenerateTriangle(usize),
    #[error("boundary node {0} does not lie on the unit circle")]
    BoundaryNodeOffCircle(usize),
    #[error("boundary edges do not form a single closed loop")]
    BrokenBoundaryLoop,
    #[error("mesh text parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Boundary edge of the triangulation, with the electrode it belongs to
/// (`None` for the insulated gap between electrodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub electrode: Option<usize>,
}

/// Triangulated unit disk.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Number of red-refinement rounds applied to the 16-sector base fan.
    /// `None` for meshes read back from text, which carry no hierarchy.
    refinement: Option<u32>,
}

/// Electrode arcs as sets of boundary-edge indices.
#[derive(Debug, Clone)]
pub struct ElectrodeLayout {
    pub m: usize,
    pub electrodes: Vec<Vec<usize>>,
    pub coverage_fraction: f64,
}

/// Disjoint cover of the mesh triangles by pixels.
#[derive(Debug, Clone)]
pub struct PixelPartition {
    /// Triangle indices of each pixel; disjoint, union is the whole mesh.
    pub pixels: Vec<Vec<usize>>,
    /// Area-weighted centroid of each pixel.
    pub centroids: Vec<[f64; 2]>,
}

/// Pixels intersecting the open origin-centered ball of radius `radius`.
#[derive(Debug, Clone)]
pub struct SupportBound {
    pub radius: f64,
    pub pixel_indices: Vec<usize>,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn refinement(&self) -> Option<u32> {
        self.refinement
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.signed_area(t)
    }

    pub fn triangle_centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangle_count()).map(|t| self.triangle_area(t)).sum()
    }

    /// Index of a triangle containing `p`, if any.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        (0..self.triangle_count()).find(|&t| self.triangle_contains(t, p))
    }

    pub fn triangle_contains(&self, t: usize, p: [f64; 2]) -> bool {
        let [a, b, c] = self.triangles[t];
        let side = |u: [f64; 2], v: [f64; 2]| {
            (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0])
        };
        let eps = -1e-12;
        side(self.nodes[a], self.nodes[b]) >= eps
            && side(self.nodes[b], self.nodes[c]) >= eps
            && side(self.nodes[c], self.nodes[a]) >= eps
    }

    /// Minimal Euclidean distance from the origin to triangle `t`.
    pub fn triangle_distance_to_origin(&self, t: usize) -> f64 {
        if self.triangle_contains(t, [0.0, 0.0]) {
            return 0.0;
        }
        let [a, b, c] = self.triangles[t];
        let segs = [
            (self.nodes[a], self.nodes[b]),
            (self.nodes[b], self.nodes[c]),
            (self.nodes[c], self.nodes[a]),
        ];
        segs.iter()
            .map(|&(u, v)| segment_distance_to_origin(u, v))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the mesh invariants: positive triangle areas, boundary nodes on
    /// the unit circle, boundary edges forming one closed loop.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for t in 0..self.triangle_count() {
            if self.signed_area(t) <= 0.0 {
                return Err(GeometryError::DegenerateTriangle(t));
            }
        }
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for e in &self.boundary_edges {
            for &n in &e.nodes {
                let p = self.nodes[n];
                if ((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() > BOUNDARY_TOL {
                    return Err(GeometryError::BoundaryNodeOffCircle(n));
                }
                *degree.entry(n).or_insert(0) += 1;
            }
        }
        if degree.values().any(|&d| d != 2) || degree.len() != self.boundary_edges.len() {
            return Err(GeometryError::BrokenBoundaryLoop);
        }
        // single loop: undirected walk from the first edge
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for e in &self.boundary_edges {
            adj.entry(e.nodes[0]).or_default().push(e.nodes[1]);
            adj.entry(e.nodes[1]).or_default().push(e.nodes[0]);
        }
        let start = self.boundary_edges[0].nodes[0];
        let mut prev = start;
        let mut cur = self.boundary_edges[0].nodes[1];
        let mut visited = 1usize;
        while cur != start {
            let nbrs = adj.get(&cur).ok_or(GeometryError::BrokenBoundaryLoop)?;
            let next = *nbrs
                .iter()
                .find(|&&n| n != prev)
                .ok_or(GeometryError::BrokenBoundaryLoop)?;
            prev = cur;
            cur = next;
            visited += 1;
            if visited > self.boundary_edges.len() {
                return Err(GeometryError::BrokenBoundaryLoop);
            }
        }
        if visited != self.boundary_edges.len() {
            return Err(GeometryError::BrokenBoundaryLoop);
        }
        Ok(())
    }

    /// Midpoint angle of a boundary edge, normalized to `[0, 2π)`.
    pub fn boundary_edge_angle(&self, e: &BoundaryEdge) -> f64 {
        let a = self.nodes[e.nodes[0]];
        let b = self.nodes[e.nodes[1]];
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        normalize_angle(mid[1].atan2(mid[0]))
    }

    /// Angular width of a boundary edge.
    pub fn boundary_edge_arc(&self, e: &BoundaryEdge) -> f64 {
        let a = self.nodes[e.nodes[0]];
        let b = self.nodes[e.nodes[1]];
        let ta = normalize_angle(a[1].atan2(a[0]));
        let tb = normalize_angle(b[1].atan2(b[0]));
        let d = (tb - ta).rem_euclid(TAU);
        d.min(TAU - d)
    }

    /// Plain-text export: header `nodes N triangles T edges E`, one node per
    /// line, one triangle per line, one boundary edge per line with its
    /// electrode id (`-1` for none).
    pub fn to_text(&self, layout: Option<&ElectrodeLayout>) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "nodes {} triangles {} edges {}",
            self.nodes.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for p in &self.nodes {
            let _ = writeln!(s, "{} {}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for (i, e) in self.boundary_edges.iter().enumerate() {
            // prefer the layout's assignment when given, else the stored one
            let id = match layout {
                Some(l) => l
                    .electrodes
                    .iter()
                    .position(|edges| edges.contains(&i))
                    .map(|x| x as i64)
                    .unwrap_or(-1),
                None => e.electrode.map(|x| x as i64).unwrap_or(-1),
            };
            let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], id);
        }
        s
    }

    pub fn write_text(&self, path: &Path, layout: Option<&ElectrodeLayout>) -> Result<(), GeometryError> {
        std::fs::write(path, self.to_text(layout))?;
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Mesh, GeometryError> {
        let parse = |line: usize, msg: &str| GeometryError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (ln, header) = lines.next().ok_or_else(|| parse(0, "empty file"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "nodes" || parts[2] != "triangles" || parts[4] != "edges" {
            return Err(parse(ln + 1, "expected header `nodes N triangles T edges E`"));
        }
        let n: usize = parts[1].parse().map_err(|_| parse(ln + 1, "bad node count"))?;
        let t: usize = parts[3].parse().map_err(|_| parse(ln + 1, "bad triangle count"))?;
        let e: usize = parts[5].parse().map_err(|_| parse(ln + 1, "bad edge count"))?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, line) = lines.next().ok_or_else(|| parse(0, "truncated node list"))?;
            let mut it = line.split_whitespace();
            let x: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse(ln + 1, "bad node coordinate"))?;
            let y: f64 = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse(ln + 1, "bad node coordinate"))?;
            nodes.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(t);
        for _ in 0..t {
            let (ln, line) = lines.next().ok_or_else(|| parse(0, "truncated triangle list"))?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|v| v.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| parse(ln + 1, "bad triangle index"))?;
            if idx.len() != 3 {
                return Err(parse(ln + 1, "expected three node indices"));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        let mut boundary_edges = Vec::with_capacity(e);
        for _ in 0..e {
            let (ln, line) = lines.next().ok_or_else(|| parse(0, "truncated edge list"))?;
            let vals: Vec<i64> = line
                .split_whitespace()
                .map(|v| v.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| parse(ln + 1, "bad edge entry"))?;
            if vals.len() != 3 {
                return Err(parse(ln + 1, "expected `a b electrode`"));
            }
            boundary_edges.push(BoundaryEdge {
                nodes: [vals[0] as usize, vals[1] as usize],
                electrode: (vals[2] >= 0).then_some(vals[2] as usize),
            });
        }
        Ok(Mesh {
            nodes,
            triangles,
            boundary_edges,
            refinement: None,
        })
    }
}

impl ElectrodeLayout {
    /// Electrode index with cyclic wrap-around (0-based).
    pub fn wrap(&self, i: isize) -> usize {
        crate::cyclic_index(i, self.m)
    }

    /// Node indices belonging to electrode `l` on `mesh`.
    pub fn electrode_nodes(&self, mesh: &Mesh, l: usize) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.electrodes[l]
            .iter()
            .flat_map(|&e| mesh.boundary_edges[e].nodes)
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Total angular extent of electrode `l`.
    pub fn electrode_arc(&self, mesh: &Mesh, l: usize) -> f64 {
        self.electrodes[l]
            .iter()
            .map(|&e| mesh.boundary_edge_arc(&mesh.boundary_edges[e]))
            .sum()
    }
}

impl PixelPartition {
    pub fn r(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixel_area(&self, mesh: &Mesh, i: usize) -> f64 {
        self.pixels[i].iter().map(|&t| mesh.triangle_area(t)).sum()
    }

    /// Pixel containing the triangle that contains `p`.
    pub fn locate(&self, mesh: &Mesh, p: [f64; 2]) -> Option<usize> {
        let t = mesh.locate(p)?;
        self.pixels.iter().position(|px| px.contains(&t))
    }
}

/// Builds the disk mesh and equiangular electrode layout. Deterministic: two
/// calls with identical arguments produce identical meshes.
pub fn build_disk_mesh(
    refinement: u32,
    m: usize,
    coverage_fraction: f64,
) -> Result<(Mesh, ElectrodeLayout), GeometryError> {
    build_disk_mesh_with_offset(refinement, m, coverage_fraction, 0.0)
}

/// Like [`build_disk_mesh`] but with the base fan rotated by `angle_offset`.
/// Electrode arcs stay centered at `2πl/m`; only the triangulation rotates.
/// Used to generate a reconstruction mesh whose elements never coincide with
/// the forward mesh.
pub fn build_disk_mesh_with_offset(
    refinement: u32,
    m: usize,
    coverage_fraction: f64,
    angle_offset: f64,
) -> Result<(Mesh, ElectrodeLayout), GeometryError> {
    if m < 4 {
        return Err(GeometryError::TooFewElectrodes(m));
    }
    if !(coverage_fraction > 0.0 && coverage_fraction < 1.0) {
        return Err(GeometryError::BadCoverage(coverage_fraction));
    }

    // base fan: center node + BASE_SECTORS boundary nodes
    let mut nodes: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for j in 0..BASE_SECTORS {
        let th = TAU * j as f64 / BASE_SECTORS as f64 + angle_offset;
        nodes.push([th.cos(), th.sin()]);
    }
    let mut triangles: Vec<[usize; 3]> = (0..BASE_SECTORS)
        .map(|j| [0, 1 + j, 1 + (j + 1) % BASE_SECTORS])
        .collect();

    for _ in 0..refinement {
        triangles = refine_once(&mut nodes, &triangles);
    }

    // orientation guard: children inherit the base fan's CCW orientation,
    // but snapping could in principle flip a sliver
    for tri in triangles.iter_mut() {
        let (pa, pb, pc) = (nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
        let s = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        if s < 0.0 {
            tri.swap(1, 2);
        }
    }

    let mut boundary_edges = collect_boundary_edges(&nodes, &triangles);

    // electrode assignment by edge midpoint angle
    let half_width = coverage_fraction * std::f64::consts::PI / m as f64;
    let mut electrodes: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, e) in boundary_edges.iter_mut().enumerate() {
        let a = nodes[e.nodes[0]];
        let b = nodes[e.nodes[1]];
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let th = normalize_angle(mid[1].atan2(mid[0]));
        for l in 0..m {
            let center = TAU * l as f64 / m as f64;
            let mut d = (th - center).rem_euclid(TAU);
            if d > TAU / 2.0 {
                d -= TAU;
            }
            if d.abs() < half_width {
                e.electrode = Some(l);
                electrodes[l].push(i);
                break;
            }
        }
    }

    if let Some((l, edges)) = electrodes.iter().enumerate().find(|(_, e)| e.len() < 2) {
        // smallest p with BASE_SECTORS * 2^p * coverage / m >= 2
        let needed = 2.0 * m as f64 / (BASE_SECTORS as f64 * coverage_fraction);
        let min_refinement = needed.log2().ceil().max(0.0) as u32;
        return Err(GeometryError::MeshTooCoarse {
            refinement,
            m,
            electrode: l,
            edges: edges.len(),
            min_refinement,
        });
    }

    let mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
        refinement: Some(refinement),
    };
    mesh.validate()?;
    let layout = ElectrodeLayout {
        m,
        electrodes,
        coverage_fraction,
    };
    Ok((mesh, layout))
}

/// Finest pixel partition: every triangle is its own pixel.
pub fn build_pixel_partition(mesh: &Mesh) -> PixelPartition {
    let pixels: Vec<Vec<usize>> = (0..mesh.triangle_count()).map(|t| vec![t]).collect();
    let centroids = pixel_centroids(mesh, &pixels);
    PixelPartition { pixels, centroids }
}

/// Pixel partition grouping triangles by their ancestor `level` refinement
/// rounds up; level 0 is the finest partition.
pub fn build_pixel_partition_coarsened(
    mesh: &Mesh,
    level: u32,
) -> Result<PixelPartition, GeometryError> {
    let depth = mesh.refinement.unwrap_or(0);
    if level > depth {
        return Err(GeometryError::BadCoarseningLevel { level, depth });
    }
    let group = 4usize.pow(level);
    let r = mesh.triangle_count() / group;
    let mut pixels: Vec<Vec<usize>> = vec![Vec::with_capacity(group); r];
    for t in 0..mesh.triangle_count() {
        pixels[t / group].push(t);
    }
    let centroids = pixel_centroids(mesh, &pixels);
    Ok(PixelPartition { pixels, centroids })
}

/// Pixels of `partition` that intersect the open origin-centered ball of
/// radius `r_b`.
pub fn support_bound(
    mesh: &Mesh,
    partition: &PixelPartition,
    r_b: f64,
) -> Result<SupportBound, GeometryError> {
    if !(r_b > 0.0 && r_b < 1.0) {
        return Err(GeometryError::BadSupportRadius(r_b));
    }
    let pixel_indices = (0..partition.r())
        .filter(|&i| {
            partition.pixels[i]
                .iter()
                .any(|&t| mesh.triangle_distance_to_origin(t) < r_b)
        })
        .collect();
    Ok(SupportBound {
        radius: r_b,
        pixel_indices,
    })
}

fn pixel_centroids(mesh: &Mesh, pixels: &[Vec<usize>]) -> Vec<[f64; 2]> {
    pixels
        .iter()
        .map(|tris| {
            let mut area = 0.0;
            let mut cx = 0.0;
            let mut cy = 0.0;
            for &t in tris {
                let a = mesh.triangle_area(t);
                let c = mesh.triangle_centroid(t);
                area += a;
                cx += a * c[0];
                cy += a * c[1];
            }
            [cx / area, cy / area]
        })
        .collect()
}

fn refine_once(nodes: &mut Vec<[f64; 2]>, triangles: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out = Vec::with_capacity(triangles.len() * 4);
    let mut mid = |nodes: &mut Vec<[f64; 2]>, a: usize, b: usize| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let pa = nodes[a];
            let pb = nodes[b];
            let mut p = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            let on = |q: [f64; 2]| ((q[0] * q[0] + q[1] * q[1]).sqrt() - 1.0).abs() <= BOUNDARY_TOL;
            if on(pa) && on(pb) {
                let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
                p = [p[0] / n, p[1] / n];
            }
            nodes.push(p);
            nodes.len() - 1
        })
    };
    for &[a, b, c] in triangles {
        let mab = mid(nodes, a, b);
        let mbc = mid(nodes, b, c);
        let mca = mid(nodes, c, a);
        // children emitted consecutively: parent of t is t / 4
        out.push([a, mab, mca]);
        out.push([mab, b, mbc]);
        out.push([mca, mbc, c]);
        out.push([mab, mbc, mca]);
    }
    out
}

fn collect_boundary_edges(nodes: &[[f64; 2]], triangles: &[[usize; 3]]) -> Vec<BoundaryEdge> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for &[a, b, c] in triangles {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            *count.entry((u.min(v), u.max(v))).or_insert(0) += 1;
        }
    }
    let mut edges: Vec<BoundaryEdge> = count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .map(|((a, b), _)| BoundaryEdge {
            nodes: [a, b],
            electrode: None,
        })
        .collect();
    edges.sort_by(|x, y| {
        let mx = edge_mid_angle(nodes, x);
        let my = edge_mid_angle(nodes, y);
        mx.partial_cmp(&my).unwrap()
    });
    edges
}

fn edge_mid_angle(nodes: &[[f64; 2]], e: &BoundaryEdge) -> f64 {
    let a = nodes[e.nodes[0]];
    let b = nodes[e.nodes[1]];
    normalize_angle((a[1] + b[1]).atan2(a[0] + b[0]))
}

fn normalize_angle(th: f64) -> f64 {
    th.rem_euclid(TAU)
}

fn segment_distance_to_origin(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (-(a[0] * d[0] + a[1] * d[1]) / len2).clamp(0.0, 1.0)
    };
    let p = [a[0] + t * d[0], a[1] + t * d[1]];
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_layout_eight_electrodes() {
        let (mesh, layout) = build_disk_mesh(3, 8, 0.5).unwrap();
        assert_eq!(layout.m, 8);
        for l in 0..8 {
            // each arc spans exactly 1/16 of the circumference
            let arc = layout.electrode_arc(&mesh, l);
            assert!((arc - TAU / 16.0).abs() < 1e-12, "arc {l} = {arc}");
        }
        // pairwise disjoint
        for a in 0..8 {
            for b in (a + 1)..8 {
                assert!(layout.electrodes[a]
                    .iter()
                    .all(|e| !layout.electrodes[b].contains(e)));
            }
        }
    }

    #[test]
    fn cyclic_adjacency_thirty_two() {
        let (_, layout) = build_disk_mesh(4, 32, 0.5).unwrap();
        // electrode 33 resolves to electrode 1 (1-based), i.e. 32 -> 0
        assert_eq!(layout.wrap(32), 0);
        assert_eq!(layout.wrap(-1), 31);
    }

    #[test]
    fn too_coarse_is_an_error() {
        let err = build_disk_mesh(2, 64, 0.5).unwrap_err();
        match err {
            GeometryError::MeshTooCoarse { min_refinement, .. } => {
                assert!(min_refinement >= 3);
            }
            other => panic!("expected MeshTooCoarse, got {other}"),
        }
    }

    #[test]
    fn deterministic_construction() {
        let (a, _) = build_disk_mesh(3, 8, 0.5).unwrap();
        let (b, _) = build_disk_mesh(3, 8, 0.5).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.triangles, b.triangles);
    }

    #[test]
    fn finest_partition_is_identity() {
        let (mesh, _) = build_disk_mesh(2, 8, 0.5).unwrap();
        let part = build_pixel_partition(&mesh);
        assert_eq!(part.r(), mesh.triangle_count());
        assert!(part.pixels.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn partition_area_is_exact() {
        let (mesh, _) = build_disk_mesh(3, 8, 0.5).unwrap();
        for level in 0..=2 {
            let part = build_pixel_partition_coarsened(&mesh, level).unwrap();
            let total: f64 = (0..part.r()).map(|i| part.pixel_area(&mesh, i)).sum();
            let area = mesh.total_area();
            assert!((total - area).abs() <= 1e-12 * area);
        }
    }

    #[test]
    fn coarsened_level_groups_four_children() {
        let (mesh, _) = build_disk_mesh(3, 8, 0.5).unwrap();
        let part = build_pixel_partition_coarsened(&mesh, 1).unwrap();
        assert_eq!(part.r(), mesh.triangle_count() / 4);
        assert!(part.pixels.iter().all(|p| p.len() == 4));
    }

    #[test]
    fn support_bound_monotone_and_full() {
        let (mesh, _) = build_disk_mesh(3, 8, 0.5).unwrap();
        let part = build_pixel_partition(&mesh);
        let b07 = support_bound(&mesh, &part, 0.7).unwrap();
        let b09 = support_bound(&mesh, &part, 0.9).unwrap();
        assert!(b07
            .pixel_indices
            .iter()
            .all(|i| b09.pixel_indices.contains(i)));
        let all = support_bound(&mesh, &part, 1.0 - 1e-12).unwrap();
        assert_eq!(all.pixel_indices.len(), part.r());
        assert!(support_bound(&mesh, &part, 1.5).is_err());
        assert!(support_bound(&mesh, &part, 0.0).is_err());
    }

    #[test]
    fn mesh_text_roundtrip() {
        let (mesh, layout) = build_disk_mesh(2, 8, 0.5).unwrap();
        let text = mesh.to_text(Some(&layout));
        let back = Mesh::from_text(&text).unwrap();
        assert_eq!(back.nodes, mesh.nodes);
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.boundary_edges.len(), mesh.boundary_edges.len());
        back.validate().unwrap();
    }
}
