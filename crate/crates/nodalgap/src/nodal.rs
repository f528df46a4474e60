//! Zero-set extraction and the geometric checks on the nodal opening: gap
//! measurement, local hyperbola fits, strip/envelope reports, nodal-domain
//! counting, and boundary intersection angles.
//!
//! The zero set of a P1 field is exact on triangle edges, so branches are
//! chained from per-triangle segments keyed by the crossing edge. Dirichlet
//! boundary nodes carry the value zero and terminate branches; exact interior
//! zeros are perturbed deterministically so marching stays unambiguous.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::mesh::{field_gradient, interpolate_field, NodalField};
use crate::modes::ModeDecomposition;

/// Relative threshold below which a nodal value counts as an exact zero.
const DEGENERATE_REL: f64 = 1e-13;
/// Two branches closer than this are reported as a crossing.
const CROSSING_PROXIMITY: f64 = 1e-9;
/// Triangles and pixels with |v| below this (relative) are treated as part of
/// the nodal set when counting domains; solver noise sits well below it.
const DEAD_BAND_REL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Edge(u32, u32),
    Node(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundarySide {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndInfo {
    pub node: u32,
    pub side: BoundarySide,
}

/// One polyline of the zero set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    /// Boundary endpoints for open branches, aligned with the first and last
    /// point. `None` when a branch terminates away from the boundary (only at
    /// artificially broken high-degree vertices).
    pub ends: [Option<EndInfo>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalSet {
    pub branches: Vec<Branch>,
    pub crossing_detected: bool,
    /// Sup-norm of the source field, fixing the scale of the thresholds used.
    pub max_abs: f64,
}

fn boundary_side(field: &NodalField, node: u32) -> BoundarySide {
    let mesh = &field.mesh;
    let (ix, iy) = mesh.node_grid_pos(node as usize);
    if ix == 0 {
        BoundarySide::Left
    } else if ix == mesh.n_x - 1 {
        BoundarySide::Right
    } else if iy == 0 {
        BoundarySide::Bottom
    } else {
        BoundarySide::Top
    }
}

/// Extract the interior zero set of the field as chained polylines.
pub fn extract_nodal_set(field: &NodalField) -> NodalSet {
    let mesh = &field.mesh;
    let max_abs = field.max_abs();
    if max_abs == 0.0 {
        return NodalSet {
            branches: Vec::new(),
            crossing_detected: false,
            max_abs,
        };
    }
    let zero_tol = DEGENERATE_REL * max_abs;

    // Working values: boundary nodes at an exact zero stay zero (they key
    // branch endpoints); degenerate interior zeros are nudged positive.
    #[derive(Clone, Copy, PartialEq)]
    enum Class {
        Zero,
        Signed(f64),
    }
    let class: Vec<Class> = field
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.abs() <= zero_tol {
                if mesh.boundary[i] {
                    Class::Zero
                } else {
                    Class::Signed(zero_tol)
                }
            } else {
                Class::Signed(v)
            }
        })
        .collect();

    let mut positions: HashMap<Key, [f64; 2]> = HashMap::new();
    let mut segments: Vec<(Key, Key)> = Vec::new();

    let crossing_point = |a: u32, b: u32, va: f64, vb: f64| -> [f64; 2] {
        let t = va / (va - vb);
        let pa = mesh.nodes[a as usize];
        let pb = mesh.nodes[b as usize];
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };

    for tri in &mesh.triangles {
        let verts = [tri[0], tri[1], tri[2]];
        let zero_count = verts
            .iter()
            .filter(|&&v| class[v as usize] == Class::Zero)
            .count();
        match zero_count {
            0 => {
                let vals = verts.map(|v| match class[v as usize] {
                    Class::Signed(w) => w,
                    Class::Zero => unreachable!(),
                });
                let mut keys: Vec<Key> = Vec::with_capacity(2);
                for e in 0..3 {
                    let (i, j) = (e, (e + 1) % 3);
                    if vals[i] * vals[j] < 0.0 {
                        let (a, b) = (verts[i], verts[j]);
                        let key = Key::Edge(a.min(b), a.max(b));
                        positions.entry(key).or_insert_with(|| {
                            if a < b {
                                crossing_point(a, b, vals[i], vals[j])
                            } else {
                                crossing_point(b, a, vals[j], vals[i])
                            }
                        });
                        keys.push(key);
                    }
                }
                if keys.len() == 2 {
                    segments.push((keys[0], keys[1]));
                }
            }
            1 => {
                let zidx = (0..3).find(|&i| class[verts[i] as usize] == Class::Zero).unwrap();
                let (a, b) = (verts[(zidx + 1) % 3], verts[(zidx + 2) % 3]);
                let (va, vb) = match (class[a as usize], class[b as usize]) {
                    (Class::Signed(x), Class::Signed(y)) => (x, y),
                    _ => unreachable!(),
                };
                if va * vb < 0.0 {
                    let znode = verts[zidx];
                    let nkey = Key::Node(znode);
                    positions
                        .entry(nkey)
                        .or_insert(mesh.nodes[znode as usize]);
                    let ekey = Key::Edge(a.min(b), a.max(b));
                    positions.entry(ekey).or_insert_with(|| {
                        if a < b {
                            crossing_point(a, b, va, vb)
                        } else {
                            crossing_point(b, a, vb, va)
                        }
                    });
                    segments.push((nkey, ekey));
                }
            }
            // Two or three boundary zeros: the zero set degenerates to a
            // boundary edge or the whole corner triangle; not interior.
            _ => {}
        }
    }

    // Adjacency and chain walking.
    let mut adjacency: HashMap<Key, Vec<usize>> = HashMap::new();
    for (s, &(ka, kb)) in segments.iter().enumerate() {
        adjacency.entry(ka).or_default().push(s);
        adjacency.entry(kb).or_default().push(s);
    }
    let mut crossing_detected = adjacency.values().any(|inc| inc.len() >= 3);

    let mut seg_used = vec![false; segments.len()];
    let mut branches: Vec<Branch> = Vec::new();

    let other_key = |s: usize, k: Key| {
        let (a, b) = segments[s];
        if a == k {
            b
        } else {
            a
        }
    };

    let walk = |start_key: Key,
                start_seg: usize,
                seg_used: &mut Vec<bool>|
     -> (Vec<Key>, bool) {
        let mut chain = vec![start_key];
        let mut key = start_key;
        let mut seg = start_seg;
        loop {
            seg_used[seg] = true;
            let next = other_key(seg, key);
            chain.push(next);
            if next == start_key {
                return (chain, true);
            }
            let incident = &adjacency[&next];
            if incident.len() != 2 {
                return (chain, false);
            }
            let follow = incident.iter().copied().find(|&s| !seg_used[s]);
            match follow {
                Some(s) => {
                    key = next;
                    seg = s;
                }
                None => return (chain, false),
            }
        }
    };

    // Open chains first (endpoints have degree != 2), then remaining loops.
    let mut endpoint_keys: Vec<Key> = adjacency
        .iter()
        .filter(|(_, inc)| inc.len() != 2)
        .map(|(&k, _)| k)
        .collect();
    endpoint_keys.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    for key in endpoint_keys {
        let incident = adjacency[&key].clone();
        for s in incident {
            if !seg_used[s] {
                let (chain, closed) = walk(key, s, &mut seg_used);
                branches.push(chain_to_branch(&chain, closed, &positions, field));
            }
        }
    }
    for s in 0..segments.len() {
        if !seg_used[s] {
            let (chain, closed) = walk(segments[s].0, s, &mut seg_used);
            branches.push(chain_to_branch(&chain, closed, &positions, field));
        }
    }

    if !crossing_detected && branch_pair_proximity(&branches) < CROSSING_PROXIMITY {
        crossing_detected = true;
    }

    NodalSet {
        branches,
        crossing_detected,
        max_abs,
    }
}

fn chain_to_branch(
    chain: &[Key],
    closed: bool,
    positions: &HashMap<Key, [f64; 2]>,
    field: &NodalField,
) -> Branch {
    let points: Vec<[f64; 2]> = chain.iter().map(|k| positions[k]).collect();
    let end_info = |k: &Key| match k {
        Key::Node(n) => Some(EndInfo {
            node: *n,
            side: boundary_side(field, *n),
        }),
        Key::Edge(..) => None,
    };
    let ends = if closed {
        [None, None]
    } else {
        [end_info(&chain[0]), end_info(chain.last().unwrap())]
    };
    Branch {
        points,
        closed,
        ends,
    }
}

/// Smallest distance between any two distinct branches, using a uniform hash
/// grid so only nearby segment pairs are tested.
fn branch_pair_proximity(branches: &[Branch]) -> f64 {
    if branches.len() < 2 {
        return f64::INFINITY;
    }
    let mut cell = 0.0f64;
    let mut segs: Vec<(usize, [f64; 2], [f64; 2])> = Vec::new();
    for (bi, b) in branches.iter().enumerate() {
        for w in b.points.windows(2) {
            let len = dist(w[0], w[1]);
            cell = cell.max(len);
            segs.push((bi, w[0], w[1]));
        }
        if b.closed && b.points.len() > 1 {
            segs.push((bi, *b.points.last().unwrap(), b.points[0]));
        }
    }
    if segs.is_empty() || cell == 0.0 {
        return f64::INFINITY;
    }
    let inv = 1.0 / cell;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &(_, p, q)) in segs.iter().enumerate() {
        let x0 = (p[0].min(q[0]) * inv).floor() as i64;
        let x1 = (p[0].max(q[0]) * inv).floor() as i64;
        let y0 = (p[1].min(q[1]) * inv).floor() as i64;
        let y1 = (p[1].max(q[1]) * inv).floor() as i64;
        for cx in x0 - 1..=x1 + 1 {
            for cy in y0 - 1..=y1 + 1 {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }
    let mut best = f64::INFINITY;
    for bucket in grid.values() {
        for (ai, &a) in bucket.iter().enumerate() {
            for &b in &bucket[ai + 1..] {
                if segs[a].0 == segs[b].0 {
                    continue;
                }
                let (d, _, _) =
                    segment_distance(segs[a].1, segs[a].2, segs[b].1, segs[b].2);
                best = best.min(d);
            }
        }
    }
    best
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Closest points between two segments (clamped projections).
fn segment_distance(
    p1: [f64; 2],
    q1: [f64; 2],
    p2: [f64; 2],
    q2: [f64; 2],
) -> (f64, [f64; 2], [f64; 2]) {
    let d1 = [q1[0] - p1[0], q1[1] - p1[1]];
    let d2 = [q2[0] - p2[0], q2[1] - p2[1]];
    let r = [p1[0] - p2[0], p1[1] - p2[1]];
    let a = d1[0] * d1[0] + d1[1] * d1[1];
    let e = d2[0] * d2[0] + d2[1] * d2[1];
    let f = d2[0] * r[0] + d2[1] * r[1];
    let (mut s, mut t);
    if a <= 1e-300 && e <= 1e-300 {
        s = 0.0;
        t = 0.0;
    } else if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1[0] * r[0] + d1[1] * r[1];
        if e <= 1e-300 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1[0] * d2[0] + d1[1] * d2[1];
            let denom = a * e - b * b;
            s = if denom != 0.0 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let c1 = [p1[0] + s * d1[0], p1[1] + s * d1[1]];
    let c2 = [p2[0] + t * d2[0], p2[1] + t * d2[1]];
    (dist(c1, c2), c1, c2)
}

/// Axis-aligned window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    /// Default opening window around the former crossing point.
    pub fn center_window(n: f64) -> Self {
        Self {
            x_min: n / 2.0 - 0.5,
            x_max: n / 2.0 + 0.5,
            y_min: 0.2,
            y_max: 0.8,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    /// Liang-Barsky clip; `None` when the segment misses the window.
    pub fn clip_segment(&self, p: [f64; 2], q: [f64; 2]) -> Option<([f64; 2], [f64; 2])> {
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        let checks = [
            (-dx, p[0] - self.x_min),
            (dx, self.x_max - p[0]),
            (-dy, p[1] - self.y_min),
            (dy, self.y_max - p[1]),
        ];
        for (den, num) in checks {
            if den.abs() < 1e-300 {
                if num < 0.0 {
                    return None;
                }
                continue;
            }
            let t = num / den;
            if den < 0.0 {
                if t > t1 {
                    return None;
                }
                t0 = t0.max(t);
            } else {
                if t < t0 {
                    return None;
                }
                t1 = t1.min(t);
            }
        }
        if t0 > t1 {
            return None;
        }
        Some((
            [p[0] + t0 * dx, p[1] + t0 * dy],
            [p[0] + t1 * dx, p[1] + t1 * dy],
        ))
    }
}

/// Minimum distance between the two nodal branches inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMeasurement {
    pub d: f64,
    pub p_star: [f64; 2],
    pub q_star: [f64; 2],
    pub window: Rect,
}

/// Measure the opening between the two branches crossing the window,
/// segment-pair exactly on the clipped polylines.
pub fn measure_gap(nodal: &NodalSet, window: Rect) -> Result<GapMeasurement> {
    let mut clipped: Vec<Vec<([f64; 2], [f64; 2])>> = Vec::new();
    for b in &nodal.branches {
        let mut segs = Vec::new();
        for w in b.points.windows(2) {
            if let Some(seg) = window.clip_segment(w[0], w[1]) {
                segs.push(seg);
            }
        }
        if b.closed && b.points.len() > 1 {
            if let Some(seg) = window.clip_segment(*b.points.last().unwrap(), b.points[0]) {
                segs.push(seg);
            }
        }
        if !segs.is_empty() {
            clipped.push(segs);
        }
    }
    if clipped.len() != 2 {
        return Err(Error::NodalTopology {
            expected: 2,
            found: clipped.len(),
        });
    }
    let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
    for (pa, qa) in &clipped[0] {
        for (pb, qb) in &clipped[1] {
            let (d, c1, c2) = segment_distance(*pa, *qa, *pb, *qb);
            if d < best.0 {
                best = (d, c1, c2);
            }
        }
    }
    Ok(GapMeasurement {
        d: best.0,
        p_star: best.1,
        q_star: best.2,
        window,
    })
}

/// Quadric `αp² + 2γpq + βq² + 2ap + 2bq + c = 0` in coordinates centered at
/// `origin`, reduced to hyperbola invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaFit {
    /// `[α, γ, β, a, b, c]`.
    pub coeffs: [f64; 6],
    pub det_h: f64,
    /// Bordered 3×3 determinant.
    pub d3: f64,
    /// Hyperbola center in absolute coordinates.
    pub center: [f64; 2],
    /// Value of the quadric at its center, `D/det H`.
    pub p0: f64,
    /// Angle of the vertex axis with the positive x-axis, in `(−π/2, π/2]`.
    pub phi: f64,
    /// `2ã` with `ã² = |D/(λ₁ det H)|`.
    pub vertex_distance: f64,
    /// Eigenvalue of the quadratic part along the vertex axis.
    pub lambda1: f64,
    pub lambda2: f64,
    /// The coefficient-assembled model fit, recorded alongside a data fit.
    pub model: Option<Box<HyperbolaFit>>,
}

/// Reduce quadric coefficients to center, axis angle, and vertex distance.
pub fn conic_reduce(coeffs: [f64; 6], origin: [f64; 2]) -> Result<HyperbolaFit> {
    let [alpha, gamma, beta, a, b, c] = coeffs;
    let det_h = alpha * beta - gamma * gamma;
    let scale = (alpha * alpha + beta * beta + 2.0 * gamma * gamma).max(1e-300);
    if det_h >= -1e-14 * scale {
        return Err(Error::FitDegenerate { det_h });
    }
    let pc = (gamma * b - beta * a) / det_h;
    let qc = (gamma * a - alpha * b) / det_h;
    let d3 = alpha * (beta * c - b * b) - gamma * (gamma * c - a * b) + a * (gamma * b - beta * a);
    let p0 = d3 / det_h;

    let tr = alpha + beta;
    let disc = ((alpha - beta).powi(2) + 4.0 * gamma * gamma).sqrt();
    let lam_hi = 0.5 * (tr + disc);
    let lam_lo = 0.5 * (tr - disc);
    // The vertex axis carries the eigenvalue of sign opposite to P0.
    let (lambda1, lambda2) = if p0 > 0.0 {
        if lam_lo < 0.0 {
            (lam_lo, lam_hi)
        } else {
            (lam_hi, lam_lo)
        }
    } else if lam_hi > 0.0 {
        (lam_hi, lam_lo)
    } else {
        (lam_lo, lam_hi)
    };
    let vertex_distance = 2.0 * (p0 / lambda1).abs().sqrt();

    let eig_vec = if gamma.abs() > 1e-300 {
        let v1 = [gamma, lambda1 - alpha];
        let v2 = [lambda1 - beta, gamma];
        if v1[0] * v1[0] + v1[1] * v1[1] >= v2[0] * v2[0] + v2[1] * v2[1] {
            v1
        } else {
            v2
        }
    } else if (lambda1 - alpha).abs() <= (lambda1 - beta).abs() {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let mut phi = eig_vec[1].atan2(eig_vec[0]);
    if phi <= -std::f64::consts::FRAC_PI_2 {
        phi += std::f64::consts::PI;
    } else if phi > std::f64::consts::FRAC_PI_2 {
        phi -= std::f64::consts::PI;
    }

    Ok(HyperbolaFit {
        coeffs,
        det_h,
        d3,
        center: [origin[0] + pc, origin[1] + qc],
        p0,
        phi,
        vertex_distance,
        lambda1,
        lambda2,
        model: None,
    })
}

/// Fit the local quadratic model at the former crossing point: a direct
/// least-squares quadric through the nodal points inside the fit disc, with
/// the coefficient-assembled model recorded for comparison.
pub fn local_quadratic_model(
    field: &NodalField,
    nodal: &NodalSet,
    dec: &ModeDecomposition,
) -> Result<HyperbolaFit> {
    let mesh = &field.mesh;
    let center = [mesh.n / 2.0, 0.5];
    let radius = (1.5 * mesh.eta.sqrt()).max(10.0 * mesh.h);

    let mut pts: Vec<[f64; 2]> = Vec::new();
    for b in &nodal.branches {
        for p in &b.points {
            if dist(*p, center) <= radius {
                pts.push(*p);
            }
        }
    }
    if pts.len() < 12 {
        return Err(Error::InsufficientData {
            needed: 12,
            got: pts.len(),
        });
    }

    // Homogeneous least squares on coordinates scaled by the disc radius.
    let mut ata = [[0.0f64; 6]; 6];
    for p in &pts {
        let ph = (p[0] - center[0]) / radius;
        let qh = (p[1] - center[1]) / radius;
        let row = [ph * ph, 2.0 * ph * qh, qh * qh, 2.0 * ph, 2.0 * qh, 1.0];
        for i in 0..6 {
            for j in 0..6 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let (_, vectors) = crate::eigen::jacobi_eigen(ata);
    let v = vectors[0];
    let r2 = radius * radius;
    let coeffs = [
        v[0] / r2,
        v[1] / r2,
        v[2] / r2,
        v[3] / radius,
        v[4] / radius,
        v[5],
    ];
    let mut fit = conic_reduce(coeffs, center)?;

    // Model coefficients from the fitted slice modes and the field at center.
    let model = (|| -> Result<HyperbolaFit> {
        let v1c = dec.v1_at_center.ok_or_else(|| {
            Error::InvalidArgument("trig forms not fitted before the quadratic model".into())
        })?;
        let v2p = dec.v2_prime_at_center.unwrap_or(0.0);
        let pi = std::f64::consts::PI;
        let vc = interpolate_field(field, center)?;
        let grad = field_gradient(field, center)?;
        let m_coeffs = [
            -0.5 * dec.mu1 * dec.mu1 * v1c,
            -pi * v2p,
            -0.5 * pi * pi * v1c,
            0.5 * grad[0],
            0.5 * grad[1],
            vc,
        ];
        conic_reduce(m_coeffs, center)
    })();
    fit.model = model.ok().map(Box::new);
    Ok(fit)
}

/// Components below this fraction of the domain area are discretization- or
/// boundary-layer-scale slivers, reported separately from the macroscopic
/// nodal-domain count the structure theorems discuss.
const MICRO_DOMAIN_AREA_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCount {
    /// Macroscopic nodal domains (area at least 1% of the domain).
    pub count: usize,
    /// Sub-threshold components.
    pub micro: usize,
}

/// Count nodal domains by union-find over edge-adjacent triangles of equal
/// sign; triangles with centroid values inside the dead band are skipped.
pub fn count_nodal_domains_mesh(field: &NodalField) -> DomainCount {
    let mesh = &field.mesh;
    let dead = DEAD_BAND_REL * field.max_abs();
    let nt = mesh.triangles.len();
    let sign: Vec<i8> = (0..nt)
        .map(|t| {
            let [a, b, c] = mesh.triangles[t];
            let m = (field.values[a as usize] + field.values[b as usize]
                + field.values[c as usize])
                / 3.0;
            if m.abs() <= dead {
                0
            } else if m > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();

    let mut parent: Vec<u32> = (0..nt as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut edge_owner: HashMap<(u32, u32), u32> = HashMap::new();
    for t in 0..nt {
        let [a, b, c] = mesh.triangles[t];
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let key = (u.min(v), u.max(v));
            match edge_owner.get(&key) {
                Some(&other) => {
                    if sign[t] != 0 && sign[t] == sign[other as usize] {
                        let ra = find(&mut parent, t as u32);
                        let rb = find(&mut parent, other);
                        parent[ra as usize] = rb;
                    }
                }
                None => {
                    edge_owner.insert(key, t as u32);
                }
            }
        }
    }
    let mut component_area: HashMap<u32, f64> = HashMap::new();
    let mut total_area = 0.0f64;
    for t in 0..nt {
        let area = mesh.triangle_area(t);
        total_area += area;
        if sign[t] != 0 {
            *component_area.entry(find(&mut parent, t as u32)).or_insert(0.0) += area;
        }
    }
    let threshold = MICRO_DOMAIN_AREA_FRACTION * total_area;
    let count = component_area.values().filter(|&&a| a >= threshold).count();
    DomainCount {
        count,
        micro: component_area.len() - count,
    }
}

/// Brute-force oracle: interpolate on a pixel raster (about `pixels` rows by
/// `N·pixels` columns, pixel centers) and flood-fill sign regions with
/// 4-connectivity, applying the same micro-domain area threshold.
pub fn count_nodal_domains_raster(field: &NodalField, pixels: usize) -> DomainCount {
    use rayon::prelude::*;
    let mesh = &field.mesh;
    let dead = DEAD_BAND_REL * field.max_abs();
    let ny = pixels;
    let nx = (mesh.n * pixels as f64).ceil() as usize;
    let x_lo = -mesh.eta.abs() - 0.01;
    let x_span = mesh.n - x_lo;
    let labels: Vec<i8> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|row| {
            let y = (row as f64 + 0.5) / ny as f64;
            (0..nx).map(move |col| {
                let x = x_lo + (col as f64 + 0.5) / nx as f64 * x_span;
                match interpolate_field(field, [x, y]) {
                    Ok(v) if v > dead => 1,
                    Ok(v) if v < -dead => -1,
                    _ => 0,
                }
            })
        })
        .collect();

    let inside_pixels = labels.iter().filter(|&&l| l != 0).count().max(1);
    let threshold = MICRO_DOMAIN_AREA_FRACTION * inside_pixels as f64;

    let mut seen = vec![false; nx * ny];
    let mut count = 0usize;
    let mut micro = 0usize;
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for row in 0..ny {
        for col in 0..nx {
            let i = row * nx + col;
            if seen[i] || labels[i] == 0 {
                continue;
            }
            let target = labels[i];
            let mut size = 0usize;
            stack.push((row, col));
            seen[i] = true;
            while let Some((r, c)) = stack.pop() {
                size += 1;
                let mut push = |rr: usize, cc: usize, stack: &mut Vec<(usize, usize)>| {
                    let j = rr * nx + cc;
                    if !seen[j] && labels[j] == target {
                        seen[j] = true;
                        stack.push((rr, cc));
                    }
                };
                if r > 0 {
                    push(r - 1, c, &mut stack);
                }
                if r + 1 < ny {
                    push(r + 1, c, &mut stack);
                }
                if c > 0 {
                    push(r, c - 1, &mut stack);
                }
                if c + 1 < nx {
                    push(r, c + 1, &mut stack);
                }
            }
            if (size as f64) >= threshold {
                count += 1;
            } else {
                micro += 1;
            }
        }
    }
    DomainCount { count, micro }
}

/// Findings for the nodal-set structure theorems; everything is reported,
/// nothing throws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckReport {
    /// Unit vector of the opening strip, `[1, ±1]/√2`.
    pub strip_direction: [f64; 2],
    /// Largest strip half-width through the center missing all nodal points.
    pub strip_halfwidth: f64,
    /// `max |x−N/2||y−1/2|/η` over nodal points with `|x−N/2| ≤ 1/10`.
    pub a0_fit: Option<f64>,
    /// `max |y−1/2|(N|sin(2πx/N)|+1)/η` over nodal points with `|x−N/2| > 1/10`.
    pub a_outer_fit: Option<f64>,
    /// Sup of `|h'|` over near-horizontal polyline segments away from center.
    pub sup_h_prime: f64,
    /// Sup of `|g'|` over near-vertical polyline segments away from center.
    pub sup_g_prime: f64,
    /// `max |g'|·(y−1/2)²/η` over the same segments.
    pub g_envelope: Option<f64>,
    pub component_count: usize,
    pub component_count_raster: usize,
    /// Sub-threshold sliver components seen by either counter.
    pub micro_components: usize,
}

/// Evaluate the strip, envelope, and nodal-domain findings.
pub fn theorem_checks(
    field: &NodalField,
    nodal: &NodalSet,
    dec: &ModeDecomposition,
    raster_pixels: usize,
) -> TheoremCheckReport {
    let mesh = &field.mesh;
    let n = mesh.n;
    let eta = mesh.eta;
    let center = [n / 2.0, 0.5];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let strip_direction = match dec.orientation_sign() {
        Some(s) if s < 0.0 => [inv_sqrt2, -inv_sqrt2],
        _ => [inv_sqrt2, inv_sqrt2],
    };
    let normal = [-strip_direction[1], strip_direction[0]];

    let mut strip_halfwidth = f64::INFINITY;
    let mut a0: Option<f64> = None;
    let mut a_outer: Option<f64> = None;
    for b in &nodal.branches {
        for pt in &b.points {
            let p = pt[0] - center[0];
            let q = pt[1] - center[1];
            strip_halfwidth = strip_halfwidth.min((p * normal[0] + q * normal[1]).abs());
            if eta > 0.0 {
                if p.abs() <= 0.1 {
                    let v = p.abs() * q.abs() / eta;
                    a0 = Some(a0.map_or(v, |a: f64| a.max(v)));
                } else {
                    let weight = n * (2.0 * std::f64::consts::PI * pt[0] / n).sin().abs() + 1.0;
                    let v = q.abs() * weight / eta;
                    a_outer = Some(a_outer.map_or(v, |a: f64| a.max(v)));
                }
            }
        }
    }
    if !strip_halfwidth.is_finite() {
        strip_halfwidth = 0.0;
    }

    // Graph-derivative envelopes outside the center disc.
    let r0 = (1.5 * eta.sqrt()).max(10.0 * mesh.h);
    let min_step = 1e-3 * mesh.h;
    let mut sup_h = 0.0f64;
    let mut sup_g = 0.0f64;
    let mut g_env: Option<f64> = None;
    for b in &nodal.branches {
        for w in b.points.windows(2) {
            let mid = [(w[0][0] + w[1][0]) / 2.0, (w[0][1] + w[1][1]) / 2.0];
            if dist(mid, center) <= r0 {
                continue;
            }
            let dx = w[1][0] - w[0][0];
            let dy = w[1][1] - w[0][1];
            if dx.abs() >= dy.abs() {
                if dx.abs() > min_step {
                    sup_h = sup_h.max((dy / dx).abs());
                }
            } else if dy.abs() > min_step {
                let gp = (dx / dy).abs();
                sup_g = sup_g.max(gp);
                if eta > 0.0 {
                    let q = (mid[1] - 0.5).abs();
                    let v = gp * q * q / eta;
                    g_env = Some(g_env.map_or(v, |a: f64| a.max(v)));
                }
            }
        }
    }

    let mesh_count = count_nodal_domains_mesh(field);
    let raster_count = count_nodal_domains_raster(field, raster_pixels);
    TheoremCheckReport {
        strip_direction,
        strip_halfwidth,
        a0_fit: a0,
        a_outer_fit: a_outer,
        sup_h_prime: sup_h,
        sup_g_prime: sup_g,
        g_envelope: g_env,
        component_count: mesh_count.count,
        component_count_raster: raster_count.count,
        micro_components: mesh_count.micro.max(raster_count.micro),
    }
}

/// CSV export of the polylines: `branch, x, y`, one row per vertex.
pub fn write_nodal_csv<W: std::io::Write>(nodal: &NodalSet, mut w: W) -> Result<()> {
    writeln!(w, "branch,x,y")?;
    for (b, branch) in nodal.branches.iter().enumerate() {
        for p in &branch.points {
            writeln!(w, "{b},{},{}", p[0], p[1])?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAngle {
    pub side: BoundarySide,
    pub point: [f64; 2],
    pub angle_deg: f64,
}

/// Angles between the nodal set and the boundary tangent at the branch
/// endpoints; exactly four endpoints are required.
pub fn boundary_angles(
    nodal: &NodalSet,
    field: &NodalField,
    spec: &DomainSpec,
) -> Result<Vec<BoundaryAngle>> {
    let mut endpoints: Vec<(EndInfo, Vec<[f64; 2]>)> = Vec::new();
    for b in &nodal.branches {
        if b.closed || b.points.len() < 2 {
            continue;
        }
        if let Some(info) = b.ends[0] {
            endpoints.push((info, b.points.iter().take(6).copied().collect()));
        }
        if let Some(info) = b.ends[1] {
            endpoints.push((info, b.points.iter().rev().take(6).copied().collect()));
        }
    }
    if endpoints.len() != 4 {
        return Err(Error::NodalTopology {
            expected: 4,
            found: endpoints.len(),
        });
    }

    let mut out = Vec::with_capacity(4);
    for (info, raw_pts) in endpoints {
        // One projected zero-crossing refinement per vertex, then a
        // least-squares line through the refined tail.
        let mut pts = Vec::with_capacity(raw_pts.len());
        for (i, p) in raw_pts.iter().enumerate() {
            if i == 0 {
                pts.push(*p);
                continue;
            }
            let refined = (|| -> Result<[f64; 2]> {
                let v = interpolate_field(field, *p)?;
                let g = field_gradient(field, *p)?;
                let g2 = g[0] * g[0] + g[1] * g[1];
                if g2 < 1e-300 {
                    return Ok(*p);
                }
                let candidate = [p[0] - v * g[0] / g2, p[1] - v * g[1] / g2];
                if interpolate_field(field, candidate).is_ok() {
                    Ok(candidate)
                } else {
                    Ok(*p)
                }
            })()
            .unwrap_or(*p);
            pts.push(refined);
        }
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        let (mut sxx, mut sxy, mut syy) = (0.0f64, 0.0f64, 0.0f64);
        for p in &pts {
            sxx += (p[0] - cx) * (p[0] - cx);
            sxy += (p[0] - cx) * (p[1] - cy);
            syy += (p[1] - cy) * (p[1] - cy);
        }
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let dir = [theta.cos(), theta.sin()];

        let end_pt = raw_pts[0];
        let tangent = match info.side {
            BoundarySide::Left => {
                let dphi = spec.profile.derivative(end_pt[1], 1)?;
                let t = [spec.eta * dphi, 1.0];
                let norm = (t[0] * t[0] + t[1] * t[1]).sqrt();
                [t[0] / norm, t[1] / norm]
            }
            BoundarySide::Right => [0.0, 1.0],
            BoundarySide::Bottom | BoundarySide::Top => [1.0, 0.0],
        };
        let cosang = (dir[0] * tangent[0] + dir[1] * tangent[1]).abs().min(1.0);
        out.push(BoundaryAngle {
            side: info.side,
            point: end_pt,
            angle_deg: cosang.acos().to_degrees(),
        });
    }
    out.sort_by(|a, b| {
        (a.side, a.point[0], a.point[1])
            .partial_cmp(&(b.side, b.point[0], b.point[1]))
            .unwrap()
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryProfile, DomainSpec, ProfileKind, SmoothnessClass};
    use crate::mesh::{build_mesh, NodalField};
    use approx::assert_relative_eq;

    fn zero_profile() -> BoundaryProfile {
        BoundaryProfile::new(
            ProfileKind::Polynomial {
                coefficients: vec![],
            },
            SmoothnessClass::C5,
        )
    }

    fn rect_field<F: Fn(f64, f64) -> f64>(n: f64, n_y: usize, f: F) -> NodalField {
        let spec = DomainSpec::new(n, 0.0, zero_profile()).unwrap();
        let mesh = build_mesh(&spec, n_y).unwrap();
        NodalField::from_fn(mesh, f)
    }

    #[test]
    fn vertical_line_extracts_as_single_polyline() {
        let field = rect_field(2.0, 17, |x, _| x - 1.0);
        let nodal = extract_nodal_set(&field);
        assert_eq!(nodal.branches.len(), 1);
        assert!(!nodal.crossing_detected);
        let b = &nodal.branches[0];
        assert!(!b.closed);
        for p in &b.points {
            assert_relative_eq!(p[0], 1.0, epsilon = 1e-12);
        }
        let ys: Vec<f64> = b.points.iter().map(|p| p[1]).collect();
        let (lo, hi) = (
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        assert_eq!((lo, hi), (0.0, 1.0));
        // Zero-level polyline points interpolate to zero on the source field.
        for p in &b.points {
            let v = interpolate_field(&field, *p).unwrap();
            assert!(v.abs() <= 1e-12 * field.max_abs());
        }
    }

    #[test]
    fn constant_sign_field_has_empty_nodal_set() {
        let field = rect_field(2.0, 17, |x, _| 1.0 + x);
        let nodal = extract_nodal_set(&field);
        assert!(nodal.branches.is_empty());
        assert!(!nodal.crossing_detected);
    }

    #[test]
    fn two_two_mode_crossing_detected() {
        let pi = std::f64::consts::PI;
        let field = rect_field(2.0, 33, move |x, y| {
            (pi * x).sin() * (2.0 * pi * y).sin()
        });
        let nodal = extract_nodal_set(&field);
        assert!(nodal.crossing_detected);
        // Two boundary-to-boundary branches hugging the center lines.
        assert_eq!(nodal.branches.len(), 2);
        let mut endpoint_sides: Vec<BoundarySide> = nodal
            .branches
            .iter()
            .flat_map(|b| b.ends.iter().flatten().map(|e| e.side))
            .collect();
        endpoint_sides.sort();
        assert_eq!(
            endpoint_sides,
            vec![
                BoundarySide::Left,
                BoundarySide::Right,
                BoundarySide::Bottom,
                BoundarySide::Top
            ]
        );
        // All nodal points sit within h of the center lines.
        let h = field.mesh.h;
        for b in &nodal.branches {
            for p in &b.points {
                let near_vertical = (p[0] - 1.0).abs() < h;
                let near_horizontal = (p[1] - 0.5).abs() < h;
                assert!(near_vertical || near_horizontal, "stray point {p:?}");
            }
        }
    }

    #[test]
    fn gap_of_analytic_hyperbola_branches() {
        // Two branches of xy = 0.01; the vertex gap is 2√(2·0.01).
        let c = 0.01;
        let mk = |sign: f64| {
            let pts: Vec<[f64; 2]> = (0..2000)
                .map(|i| {
                    let x = sign * (0.02 + 0.48 * i as f64 / 1999.0);
                    [x, c / x]
                })
                .collect();
            Branch {
                points: pts,
                closed: false,
                ends: [None, None],
            }
        };
        let nodal = NodalSet {
            branches: vec![mk(1.0), mk(-1.0)],
            crossing_detected: false,
            max_abs: 1.0,
        };
        let window = Rect {
            x_min: -0.5,
            x_max: 0.5,
            y_min: -0.5,
            y_max: 0.5,
        };
        let gap = measure_gap(&nodal, window).unwrap();
        assert_relative_eq!(gap.d, 2.0 * (2.0 * c).sqrt(), epsilon = 1e-3);
        // The achieving points are near the vertices.
        assert!(dist(gap.p_star, [0.1, 0.1]) < 5e-3 || dist(gap.p_star, [-0.1, -0.1]) < 5e-3);
    }

    #[test]
    fn gap_requires_exactly_two_branches() {
        let one = NodalSet {
            branches: vec![Branch {
                points: vec![[0.0, 0.0], [1.0, 0.0]],
                closed: false,
                ends: [None, None],
            }],
            crossing_detected: false,
            max_abs: 1.0,
        };
        let window = Rect {
            x_min: -1.0,
            x_max: 2.0,
            y_min: -1.0,
            y_max: 1.0,
        };
        assert!(matches!(
            measure_gap(&one, window),
            Err(Error::NodalTopology {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn conic_reduction_of_pq_hyperbola() {
        // pq = η written as 2·(1/2)pq − η = 0.
        let eta = 0.03;
        let fit = conic_reduce([0.0, 0.5, 0.0, 0.0, 0.0, -eta], [0.0, 0.0]).unwrap();
        assert!(fit.det_h < 0.0);
        assert_relative_eq!(fit.center[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(fit.center[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(fit.phi, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        assert_relative_eq!(
            fit.vertex_distance,
            2.0 * (2.0 * eta).sqrt(),
            epsilon = 1e-12
        );
        // tan(2φ) = 2γ/(α−β) blows up consistently with α = β: cos(2φ) ≈ 0.
        assert!((2.0 * fit.phi).cos().abs() < 1e-12);
    }

    #[test]
    fn conic_angle_limit() {
        // γ → 0⁺ with α−β → 0⁺: tan(2φ) → +∞ so φ → π/4.
        let fit = conic_reduce([1e-9, 1e-6, 0.0, 0.0, 0.0, -1.0], [0.0, 0.0]).unwrap();
        assert!((fit.phi - std::f64::consts::FRAC_PI_4).abs() < 1e-3);
        // Opposite cross-term sign flips the orientation.
        let fit = conic_reduce([1e-9, -1e-6, 0.0, 0.0, 0.0, -1.0], [0.0, 0.0]).unwrap();
        assert!((fit.phi + std::f64::consts::FRAC_PI_4).abs() < 1e-3);
    }

    #[test]
    fn conic_rejects_ellipse() {
        assert!(matches!(
            conic_reduce([1.0, 0.0, 1.0, 0.0, 0.0, -1.0], [0.0, 0.0]),
            Err(Error::FitDegenerate { .. })
        ));
    }

    #[test]
    fn component_counts_on_product_modes() {
        let pi = std::f64::consts::PI;
        let cases: Vec<(Box<dyn Fn(f64, f64) -> f64>, usize)> = vec![
            (Box::new(move |x, y| (pi * x / 2.0).sin() * (pi * y).sin()), 1),
            (Box::new(move |x, y| (pi * x).sin() * (2.0 * pi * y).sin()), 4),
            (Box::new(move |x, y| (1.5 * pi * x).sin() * (pi * y).sin()), 3),
        ];
        for (f, expected) in cases {
            let field = rect_field(2.0, 33, move |x, y| f(x, y));
            let mesh_count = count_nodal_domains_mesh(&field);
            let raster_count = count_nodal_domains_raster(&field, 80);
            assert_eq!(mesh_count.count, expected);
            assert_eq!(mesh_count.micro, 0);
            assert_eq!(raster_count.count, expected);
            assert_eq!(raster_count.micro, 0);
        }
    }

    #[test]
    fn boundary_angles_at_unperturbed_crossing() {
        let pi = std::f64::consts::PI;
        let spec = DomainSpec::new(2.0, 0.0, zero_profile()).unwrap();
        let mesh = build_mesh(&spec, 33).unwrap();
        let field = NodalField::from_fn(mesh, move |x, y| (pi * x).sin() * (2.0 * pi * y).sin());
        let nodal = extract_nodal_set(&field);
        let angles = boundary_angles(&nodal, &field, &spec).unwrap();
        assert_eq!(angles.len(), 4);
        for a in &angles {
            assert!(
                (a.angle_deg - 90.0).abs() < 1.0,
                "angle {} at {:?} side {:?}",
                a.angle_deg,
                a.point,
                a.side
            );
        }
        let expected = [[0.0, 0.5], [2.0, 0.5], [1.0, 0.0], [1.0, 1.0]];
        for e in expected {
            assert!(
                angles.iter().any(|a| dist(a.point, e) < 2.0 * field.mesh.h),
                "no endpoint near {e:?}"
            );
        }
    }
}
