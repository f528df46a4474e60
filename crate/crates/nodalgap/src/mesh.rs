//! Boundary-fitted structured triangulation of `Ω` with field interpolation
//! and gradient recovery.
//!
//! Nodes come from the transfinite map `(s, y) ↦ (l(y) + s·(N − l(y)), y)`
//! with `l(y) = η·φ_L(y)`, both parameters on uniform grids. Each quad cell is
//! split along its shorter diagonal; exact ties alternate in a checkerboard so
//! that meshes over profiles symmetric about `y = 1/2` stay mirror-symmetric.
//! Node indices run y-fastest (`ix·n_y + iy`), which keeps the assembled
//! operators banded with bandwidth about `n_y`.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

/// Barycentric slack accepted by point location; covers queries within about
/// 1e-9 of the polygon.
const LOCATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-node flag: lies on `∂Ω`.
    pub boundary: Vec<bool>,
    pub n_x: usize,
    pub n_y: usize,
    /// Nominal spacing: maximum triangle circumdiameter.
    pub h: f64,
    pub n: f64,
    pub eta: f64,
    /// `η·φ_L(y_j)` per row.
    left_x: Vec<f64>,
    /// CSR adjacency node -> incident triangles.
    node_tri_ptr: Vec<u32>,
    node_tri: Vec<u32>,
}

impl Mesh {
    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.n_y + iy
    }

    pub fn node_grid_pos(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_y, idx % self.n_y)
    }

    pub fn left_boundary_x(&self, row: usize) -> f64 {
        self.left_x[row]
    }

    /// Left boundary abscissa at arbitrary height, linear between mesh rows
    /// (exactly the polygonal boundary the mesh resolves).
    pub fn left_x_at(&self, y: f64) -> f64 {
        let m = self.n_y - 1;
        let t = (y.clamp(0.0, 1.0)) * m as f64;
        let j = (t.floor() as usize).min(m - 1);
        let frac = t - j as f64;
        self.left_x[j] * (1.0 - frac) + self.left_x[j + 1] * frac
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a as usize];
        let pb = self.nodes[b as usize];
        let pc = self.nodes[c as usize];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min_angle = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangles[t];
            let pts = [
                self.nodes[a as usize],
                self.nodes[b as usize],
                self.nodes[c as usize],
            ];
            for i in 0..3 {
                let p = pts[i];
                let q = pts[(i + 1) % 3];
                let r = pts[(i + 2) % 3];
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let dot = u[0] * v[0] + u[1] * v[1];
                let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                let angle = (dot / (nu * nv)).clamp(-1.0, 1.0).acos();
                min_angle = min_angle.min(angle);
            }
        }
        min_angle.to_degrees()
    }

    pub fn incident_triangles(&self, node: usize) -> &[u32] {
        let lo = self.node_tri_ptr[node] as usize;
        let hi = self.node_tri_ptr[node + 1] as usize;
        &self.node_tri[lo..hi]
    }

    fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a as usize];
        let pb = self.nodes[b as usize];
        let pc = self.nodes[c as usize];
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pc[0] - p[0]) * (pb[1] - p[1])) / det;
        let l2 = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pa[0] - p[0]) * (pc[1] - p[1])) / det;
        [l1, l2, 1.0 - l1 - l2]
    }

    fn cell_triangles(&self, ix: usize, iy: usize) -> [usize; 2] {
        let cell = ix * (self.n_y - 1) + iy;
        [2 * cell, 2 * cell + 1]
    }

    /// Locate the triangle containing `p` via the inverse transfinite map.
    /// Returns the triangle index and clamped barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = 1e-9;
        if p[1] < -tol || p[1] > 1.0 + tol || !p[0].is_finite() || !p[1].is_finite() {
            return None;
        }
        let my = self.n_y - 1;
        let mx = self.n_x - 1;
        let iy = ((p[1] * my as f64).floor() as i64).clamp(0, my as i64 - 1) as usize;
        let l = self.left_x_at(p[1]);
        let s = (p[0] - l) / (self.n - l);
        if !(-1e-6..=1.0 + 1e-6).contains(&s) {
            // Clearly outside; keep a small margin before giving up so that
            // boundary queries within tolerance still resolve.
            if s < -LOCATE_TOL || s > 1.0 + LOCATE_TOL {
                return None;
            }
        }
        let ix = ((s * mx as f64).floor() as i64).clamp(0, mx as i64 - 1) as usize;

        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for dx in [0i64, -1, 1] {
            for dy in [0i64, -1, 1] {
                let cx = ix as i64 + dx;
                let cy = iy as i64 + dy;
                if cx < 0 || cy < 0 || cx >= mx as i64 || cy >= my as i64 {
                    continue;
                }
                for t in self.cell_triangles(cx as usize, cy as usize) {
                    let bary = self.barycentric(t, p);
                    let worst = bary.iter().fold(f64::INFINITY, |m, &l| m.min(l));
                    if worst >= -LOCATE_TOL {
                        let clamped = clamp_bary(bary);
                        return Some((t, clamped));
                    }
                    if best.map_or(true, |(_, _, w)| worst > w) {
                        best = Some((t, clamp_bary(bary), worst));
                    }
                }
            }
        }
        // Resort to the best nearby candidate only if it is marginally outside.
        best.and_then(|(t, bary, worst)| (worst >= -1e-4).then_some((t, bary)))
    }

    /// Constant P1 gradient of `values` on triangle `t`.
    fn triangle_gradient(&self, t: usize, values: &[f64]) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a as usize];
        let pb = self.nodes[b as usize];
        let pc = self.nodes[c as usize];
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let (va, vb, vc) = (
            values[a as usize],
            values[b as usize],
            values[c as usize],
        );
        let gx = (va * (pb[1] - pc[1]) + vb * (pc[1] - pa[1]) + vc * (pa[1] - pb[1])) / det;
        let gy = (va * (pc[0] - pb[0]) + vb * (pa[0] - pc[0]) + vc * (pb[0] - pa[0])) / det;
        [gx, gy]
    }

    fn triangle_centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a as usize];
        let pb = self.nodes[b as usize];
        let pc = self.nodes[c as usize];
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    /// Dump in the documented plain-text format: `"<nodes> T <triangles>"`
    /// header, one `x y` row per node, then one `a b c` index row per triangle.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} T {}", self.nodes.len(), self.triangles.len())?;
        for p in &self.nodes {
            writeln!(w, "{} {}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn clamp_bary(bary: [f64; 3]) -> [f64; 3] {
    let mut b = bary.map(|l| l.max(0.0));
    let sum: f64 = b.iter().sum();
    for l in &mut b {
        *l /= sum;
    }
    b
}

/// Build the transfinite mesh with `n_y` nodes across the unit height and
/// `round(N·(n_y−1)) + 1` nodes lengthwise, giving near-isotropic cells.
pub fn build_mesh(spec: &DomainSpec, n_y: usize) -> Result<Arc<Mesh>> {
    if n_y < 17 {
        return Err(Error::InvalidArgument(format!(
            "vertical node count must be >= 17, got {n_y}"
        )));
    }
    build_mesh_impl(spec, n_y)
}

/// Same construction without the resolution floor; single-cell meshes are
/// still useful as hand-checkable stencil fixtures in tests.
pub(crate) fn build_mesh_impl(spec: &DomainSpec, n_y: usize) -> Result<Arc<Mesh>> {
    if n_y < 2 {
        return Err(Error::InvalidArgument(format!(
            "vertical node count must be >= 2, got {n_y}"
        )));
    }
    let n = spec.n;
    let n_x = (n * (n_y as f64 - 1.0)).round() as usize + 1;

    let left_x: Vec<f64> = (0..n_y)
        .map(|j| {
            let y = j as f64 / (n_y - 1) as f64;
            Ok(spec.eta * spec.profile.eval(y)?)
        })
        .collect::<Result<_>>()?;
    let max_left = left_x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_left >= n - 1e-9 {
        return Err(Error::Geometry(format!(
            "perturbed left side reaches x = {max_left:.4}, touching the right side N = {n}"
        )));
    }

    let mut nodes = Vec::with_capacity(n_x * n_y);
    let mut boundary = vec![false; n_x * n_y];
    for ix in 0..n_x {
        let s = ix as f64 / (n_x - 1) as f64;
        for iy in 0..n_y {
            let y = iy as f64 / (n_y - 1) as f64;
            let l = left_x[iy];
            let x = if ix == 0 {
                l
            } else if ix == n_x - 1 {
                n
            } else {
                l + s * (n - l)
            };
            nodes.push([x, y]);
            if ix == 0 || ix == n_x - 1 || iy == 0 || iy == n_y - 1 {
                boundary[ix * n_y + iy] = true;
            }
        }
    }

    let mut triangles = Vec::with_capacity(2 * (n_x - 1) * (n_y - 1));
    let idx = |ix: usize, iy: usize| (ix * n_y + iy) as u32;
    for ix in 0..n_x - 1 {
        for iy in 0..n_y - 1 {
            let a = idx(ix, iy);
            let b = idx(ix + 1, iy);
            let c = idx(ix + 1, iy + 1);
            let d = idx(ix, iy + 1);
            let dist2 = |u: u32, v: u32| {
                let pu = nodes[u as usize];
                let pv = nodes[v as usize];
                (pu[0] - pv[0]).powi(2) + (pu[1] - pv[1]).powi(2)
            };
            let ac = dist2(a, c);
            let bd = dist2(b, d);
            let tie = (ac - bd).abs() <= 1e-12 * (ac + bd);
            let use_ac = if tie { (ix + iy) % 2 == 0 } else { ac < bd };
            if use_ac {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }

    let mut h: f64 = 0.0;
    for t in 0..triangles.len() {
        let [a, b, c] = triangles[t];
        let pa = nodes[a as usize];
        let pb = nodes[b as usize];
        let pc = nodes[c as usize];
        let area =
            0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]));
        if area <= 0.0 {
            return Err(Error::Geometry(format!(
                "triangle {t} degenerate or inverted (area {area:.3e})"
            )));
        }
        let la = ((pb[0] - pc[0]).powi(2) + (pb[1] - pc[1]).powi(2)).sqrt();
        let lb = ((pa[0] - pc[0]).powi(2) + (pa[1] - pc[1]).powi(2)).sqrt();
        let lc = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        h = h.max(la * lb * lc / (2.0 * area));
    }

    let mut counts = vec![0u32; n_x * n_y + 1];
    for tri in &triangles {
        for &v in tri {
            counts[v as usize + 1] += 1;
        }
    }
    for i in 0..n_x * n_y {
        counts[i + 1] += counts[i];
    }
    let node_tri_ptr = counts.clone();
    let mut fill = counts;
    let mut node_tri = vec![0u32; triangles.len() * 3];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            node_tri[fill[v as usize] as usize] = t as u32;
            fill[v as usize] += 1;
        }
    }

    Ok(Arc::new(Mesh {
        nodes,
        triangles,
        boundary,
        n_x,
        n_y,
        h,
        n,
        eta: spec.eta,
        left_x,
        node_tri_ptr,
        node_tri,
    }))
}

/// Scalar field with one value per mesh node.
#[derive(Debug, Clone)]
pub struct NodalField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.nodes.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("field contains non-finite values".into()));
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(mesh: Arc<Mesh>, f: F) -> Self {
        let values = mesh.nodes.iter().map(|p| f(p[0], p[1])).collect();
        Self { mesh, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Barycentric-linear value of the field at `p`.
pub fn interpolate_field(field: &NodalField, p: [f64; 2]) -> Result<f64> {
    let (t, bary) = field
        .mesh
        .locate(p)
        .ok_or(Error::PointOutsideDomain { x: p[0], y: p[1] })?;
    let [a, b, c] = field.mesh.triangles[t];
    Ok(bary[0] * field.values[a as usize]
        + bary[1] * field.values[b as usize]
        + bary[2] * field.values[c as usize])
}

/// Recovered gradient at `p` by superconvergent patch recovery: a linear
/// least-squares fit of the per-element P1 gradients (sampled at centroids)
/// over the star of the nearest vertex of the containing triangle, evaluated
/// at `p`. The symmetric interior stars cancel the alternating O(h) element
/// errors, giving O(h²) away from corners.
pub fn field_gradient(field: &NodalField, p: [f64; 2]) -> Result<[f64; 2]> {
    let mesh = &field.mesh;
    let (t, bary) = mesh
        .locate(p)
        .ok_or(Error::PointOutsideDomain { x: p[0], y: p[1] })?;
    let verts = mesh.triangles[t];
    let nearest = (0..3)
        .max_by(|&i, &j| bary[i].total_cmp(&bary[j]))
        .map(|i| verts[i])
        .unwrap();

    let mut patch: Vec<u32> = mesh.incident_triangles(nearest as usize).to_vec();
    if patch.len() < 4 {
        // Corner stars are too small for a stable linear fit; widen to the
        // union of the three vertex stars.
        for &v in &verts {
            patch.extend_from_slice(mesh.incident_triangles(v as usize));
        }
        patch.sort_unstable();
        patch.dedup();
    }

    // Normal equations for g(x, y) = a0 + a1 x + a2 y per component, centered
    // at the star's node.
    let center = mesh.nodes[nearest as usize];
    let mut ata = [[0.0f64; 3]; 3];
    let mut rhs_x = [0.0f64; 3];
    let mut rhs_y = [0.0f64; 3];
    for &pt in &patch {
        let c = mesh.triangle_centroid(pt as usize);
        let g = mesh.triangle_gradient(pt as usize, &field.values);
        let row = [1.0, c[0] - center[0], c[1] - center[1]];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            rhs_x[i] += row[i] * g[0];
            rhs_y[i] += row[i] * g[1];
        }
    }
    match (solve3(ata, rhs_x), solve3(ata, rhs_y)) {
        (Some(ax), Some(ay)) => {
            let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
            Ok([
                ax[0] + ax[1] * dx + ax[2] * dy,
                ay[0] + ay[1] * dx + ay[2] * dy,
            ])
        }
        // Skinny or tiny patches: fall back to the element value.
        _ => Ok(mesh.triangle_gradient(t, &field.values)),
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-13 * (m[0][0].abs() + 1e-300) {
            return None;
        }
        m.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}
