//! Boundary profiles of the perturbed side, their constraint checks, and the
//! shape integrals `I_k = ∫ φ_L(y) sin(2πy) sin(kπy) dy` that drive the
//! first-order boundary-variation predictor.
//!
//! The domain is `Ω = {(x, y) : y ∈ [0,1], η·φ_L(y) ≤ x ≤ N}`. Two strictness
//! levels exist for `φ_L`: the `C5` class (zero endpoints, values in `[-1, 0]`,
//! derivatives up to order five bounded by one) and the relaxed `Lipschitz`
//! class (values in `[-1, 1]`, finite slope).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of panels in the dense sampling grid used for validation and the
/// symmetry defect.
pub const VALIDATION_GRID: usize = 4096;

/// Quadrature stops refining once two successive panel doublings agree to this.
pub const QUADRATURE_TOL: f64 = 1e-10;

const MAX_DOUBLINGS: usize = 20;
const GL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sin,
    Cos,
}

/// Parameterization of the left-side profile `φ_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileKind {
    /// `sin(fπy)` or `cos(fπy)`.
    Sinusoid { frequency: u32, phase: Phase },
    /// Triangular pulses of the given half-width, one signed unit pulse per center.
    Hat {
        centers: Vec<f64>,
        radius: f64,
        signs: Vec<f64>,
    },
    /// Sine-crest pulses: `±cos(π(y-c)/(2r))` on `|y-c| ≤ r`.
    Bump {
        centers: Vec<f64>,
        radius: f64,
        signs: Vec<f64>,
    },
    /// `c_0 + c_1 y + c_2 y² + …`.
    Polynomial { coefficients: Vec<f64> },
    /// Piecewise-linear through samples on a uniform grid over `[0, 1]`.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessClass {
    C5,
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    pub smoothness: SmoothnessClass,
}

impl BoundaryProfile {
    pub fn new(kind: ProfileKind, smoothness: SmoothnessClass) -> Self {
        Self { kind, smoothness }
    }

    /// Short identifier used in reports, e.g. `sin6pi` or `hat2`.
    pub fn id(&self) -> String {
        match &self.kind {
            ProfileKind::Sinusoid { frequency, phase } => match phase {
                Phase::Sin => format!("sin{frequency}pi"),
                Phase::Cos => format!("cos{frequency}pi"),
            },
            ProfileKind::Hat { centers, .. } => format!("hat{}", centers.len()),
            ProfileKind::Bump { centers, .. } => format!("bump{}", centers.len()),
            ProfileKind::Polynomial { coefficients } => format!("poly{}", coefficients.len()),
            ProfileKind::Tabulated { values } => format!("tab{}", values.len()),
        }
    }

    /// Evaluate `φ_L(y)`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        if !(-1e-12..=1.0 + 1e-12).contains(&y) {
            return Err(Error::InvalidArgument(format!(
                "profile argument y = {y} outside [0, 1]"
            )));
        }
        let y = y.clamp(0.0, 1.0);
        Ok(self.eval_unchecked(y))
    }

    fn eval_unchecked(&self, y: f64) -> f64 {
        match &self.kind {
            ProfileKind::Sinusoid { frequency, phase } => {
                let arg = *frequency as f64 * std::f64::consts::PI * y;
                match phase {
                    Phase::Sin => arg.sin(),
                    Phase::Cos => arg.cos(),
                }
            }
            ProfileKind::Hat {
                centers,
                radius,
                signs,
            } => centers
                .iter()
                .zip(signs)
                .map(|(c, s)| s * (1.0 - (y - c).abs() / radius).max(0.0))
                .sum(),
            ProfileKind::Bump {
                centers,
                radius,
                signs,
            } => centers
                .iter()
                .zip(signs)
                .map(|(c, s)| {
                    let t = (y - c).abs();
                    if t <= *radius {
                        s * (std::f64::consts::PI * t / (2.0 * radius)).cos()
                    } else {
                        0.0
                    }
                })
                .sum(),
            ProfileKind::Polynomial { coefficients } => coefficients
                .iter()
                .rev()
                .fold(0.0, |acc, c| acc * y + c),
            ProfileKind::Tabulated { values } => {
                if values.is_empty() {
                    return 0.0;
                }
                if values.len() == 1 {
                    return values[0];
                }
                let m = values.len() - 1;
                let t = y * m as f64;
                let i = (t.floor() as usize).min(m - 1);
                let frac = t - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Analytic `d^j φ_L / dy^j` where available (`Sinusoid`, `Polynomial`).
    fn analytic_derivative(&self, y: f64, j: u32) -> Option<f64> {
        match &self.kind {
            ProfileKind::Sinusoid { frequency, phase } => {
                let w = *frequency as f64 * std::f64::consts::PI;
                let arg = w * y + j as f64 * std::f64::consts::FRAC_PI_2;
                let base = match phase {
                    Phase::Sin => arg.sin(),
                    Phase::Cos => arg.cos(),
                };
                Some(w.powi(j as i32) * base)
            }
            ProfileKind::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for (p, c) in coefficients.iter().enumerate().skip(j as usize).rev() {
                    let mut fac = 1.0;
                    for q in 0..j as usize {
                        fac *= (p - q) as f64;
                    }
                    acc = acc * y + fac * c;
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// `d^j φ_L / dy^j`, falling back to iterated central differences on the
    /// validation grid for kinds without closed-form derivatives.
    pub fn derivative(&self, y: f64, j: u32) -> Result<f64> {
        if j == 0 {
            return self.eval(y);
        }
        if let Some(v) = self.analytic_derivative(y.clamp(0.0, 1.0), j) {
            return Ok(v);
        }
        let h = 1.0 / VALIDATION_GRID as f64;
        // Iterated central difference of width j*h; one-sided near the endpoints.
        let half = j as f64 * h / 2.0;
        let base = y.clamp(half, 1.0 - half);
        let mut stencil: Vec<f64> = (0..=j)
            .map(|i| self.eval_unchecked((base - half + i as f64 * h).clamp(0.0, 1.0)))
            .collect();
        for _ in 0..j {
            for i in 0..stencil.len() - 1 {
                stencil[i] = (stencil[i + 1] - stencil[i]) / h;
            }
            stencil.pop();
        }
        Ok(stencil[0])
    }

    /// Abscissae where the profile is not smooth; quadrature panels align here.
    pub fn kinks(&self) -> Vec<f64> {
        let mut ks = Vec::new();
        match &self.kind {
            ProfileKind::Hat { centers, radius, .. } => {
                for c in centers {
                    ks.extend([c - radius, *c, c + radius]);
                }
            }
            ProfileKind::Bump { centers, radius, .. } => {
                for c in centers {
                    ks.extend([c - radius, c + radius]);
                }
            }
            ProfileKind::Tabulated { values } if values.len() > 2 => {
                let m = values.len() - 1;
                ks.extend((1..m).map(|i| i as f64 / m as f64));
            }
            _ => {}
        }
        ks.retain(|k| *k > 0.0 && *k < 1.0);
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        ks
    }
}

/// The pair `(N, η)` plus the left-side profile; owns the domain `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub n: f64,
    pub eta: f64,
    pub profile: BoundaryProfile,
}

impl DomainSpec {
    pub fn new(n: f64, eta: f64, profile: BoundaryProfile) -> Result<Self> {
        if !(n.is_finite() && n > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "aspect ratio N must be finite and > 1, got {n}"
            )));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "perturbation amplitude eta must be finite and >= 0, got {eta}"
            )));
        }
        Ok(Self { n, eta, profile })
    }

    /// The left boundary abscissa `η·φ_L(y)`.
    pub fn left_x(&self, y: f64) -> Result<f64> {
        Ok(self.eta * self.profile.eval(y)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    NonFinite,
    EndpointsZero,
    LowerBound,
    UpperBound,
    DerivativeBound(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub worst_value: f64,
    pub at_y: f64,
}

/// Result of [`validate_profile`]; empty iff all class invariants hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, constraint: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }
}

/// Check the declared smoothness-class invariants on the dense sampling grid.
/// Violations are reported, never thrown.
pub fn validate_profile(spec: &DomainSpec) -> ValidationReport {
    let profile = &spec.profile;
    let mut report = ValidationReport::default();
    let m = VALIDATION_GRID;
    let mut worst_low = (f64::INFINITY, 0.0);
    let mut worst_high = (f64::NEG_INFINITY, 0.0);
    let mut nonfinite_at = None;
    for i in 0..=m {
        let y = i as f64 / m as f64;
        let v = profile.eval_unchecked(y);
        if !v.is_finite() {
            nonfinite_at.get_or_insert(y);
            continue;
        }
        if v < worst_low.0 {
            worst_low = (v, y);
        }
        if v > worst_high.0 {
            worst_high = (v, y);
        }
    }
    if let Some(y) = nonfinite_at {
        report.violations.push(Violation {
            constraint: Constraint::NonFinite,
            worst_value: f64::NAN,
            at_y: y,
        });
        return report;
    }

    let tol = 1e-9;
    if worst_low.0 < -1.0 - tol {
        report.violations.push(Violation {
            constraint: Constraint::LowerBound,
            worst_value: worst_low.0,
            at_y: worst_low.1,
        });
    }
    let upper = match profile.smoothness {
        SmoothnessClass::C5 => 0.0,
        SmoothnessClass::Lipschitz => 1.0,
    };
    if worst_high.0 > upper + tol {
        report.violations.push(Violation {
            constraint: Constraint::UpperBound,
            worst_value: worst_high.0,
            at_y: worst_high.1,
        });
    }

    if profile.smoothness == SmoothnessClass::C5 {
        let e0 = profile.eval_unchecked(0.0);
        let e1 = profile.eval_unchecked(1.0);
        if e0.abs() > tol || e1.abs() > tol {
            report.violations.push(Violation {
                constraint: Constraint::EndpointsZero,
                worst_value: if e0.abs() >= e1.abs() { e0 } else { e1 },
                at_y: if e0.abs() >= e1.abs() { 0.0 } else { 1.0 },
            });
        }
        for j in 1..=5u32 {
            let mut worst = (0.0f64, 0.0f64);
            for i in 0..=m {
                let y = i as f64 / m as f64;
                let d = profile.derivative(y, j).unwrap_or(f64::NAN);
                if d.abs() > worst.0.abs() {
                    worst = (d, y);
                }
            }
            if worst.0.abs() > 1.0 + 1e-6 {
                report.violations.push(Violation {
                    constraint: Constraint::DerivativeBound(j),
                    worst_value: worst.0,
                    at_y: worst.1,
                });
            }
        }
    }
    report
}

/// `sup_y |φ_L(y) − φ_L(1−y)|`; zero identifies the symmetric class for which
/// the nodal crossing is genuine.
pub fn symmetry_defect(profile: &BoundaryProfile) -> f64 {
    let m = VALIDATION_GRID;
    (0..=m)
        .map(|i| {
            let y = i as f64 / m as f64;
            (profile.eval_unchecked(y) - profile.eval_unchecked(1.0 - y)).abs()
        })
        .fold(0.0, f64::max)
}

fn gl16() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        // Newton iteration on the Legendre recurrence; exact to roundoff.
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gl16();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Composite Gauss-Legendre over `[0, 1]` with panels aligned to `breaks`,
/// doubling the panel count until two sweeps agree to [`QUADRATURE_TOL`].
fn adaptive_quadrature<F: Fn(f64) -> f64>(f: &F, breaks: &[f64]) -> Result<f64> {
    let mut edges: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    edges.push(0.0);
    edges.extend(breaks.iter().copied().filter(|b| *b > 0.0 && *b < 1.0));
    edges.push(1.0);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let sweep = |edges: &[f64]| -> f64 {
        edges
            .windows(2)
            .map(|w| gl_panel(f, w[0], w[1]))
            .sum::<f64>()
    };

    let mut prev = sweep(&edges);
    for _ in 0..MAX_DOUBLINGS {
        let mut refined = Vec::with_capacity(edges.len() * 2);
        for w in edges.windows(2) {
            refined.push(w[0]);
            refined.push(0.5 * (w[0] + w[1]));
        }
        refined.push(*edges.last().unwrap());
        edges = refined;
        let next = sweep(&edges);
        if (next - prev).abs() < QUADRATURE_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "quadrature did not converge after {MAX_DOUBLINGS} panel doublings"
    )))
}

/// `I_k = ∫₀¹ φ_L(y) sin(2πy) sin(kπy) dy`.
pub fn shape_integral(profile: &BoundaryProfile, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!(
            "mode index k must be >= 1, got {k}"
        )));
    }
    let kinks = profile.kinks();
    let f = |y: f64| {
        profile.eval_unchecked(y)
            * (2.0 * std::f64::consts::PI * y).sin()
            * (k as f64 * std::f64::consts::PI * y).sin()
    };
    adaptive_quadrature(&f, &kinks)
}

/// The map `k ↦ I_k`, precomputed up to `k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeIntegrals {
    values: Vec<f64>,
    pub k_max: usize,
}

impl ShapeIntegrals {
    pub fn compute(profile: &BoundaryProfile, k_max: usize) -> Result<Self> {
        let values = (1..=k_max)
            .map(|k| shape_integral(profile, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values, k_max })
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        (1..=self.k_max).contains(&k).then(|| self.values[k - 1])
    }
}

/// Closed, counterclockwise polygonal approximation of `∂Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolygon {
    /// First point is not repeated at the end; closure is implied.
    pub points: Vec<[f64; 2]>,
}

impl BoundaryPolygon {
    /// Signed area by the shoelace formula (positive for counterclockwise).
    pub fn area(&self) -> f64 {
        let pts = &self.points;
        let n = pts.len();
        let mut acc = 0.0;
        for i in 0..n {
            let [x0, y0] = pts[i];
            let [x1, y1] = pts[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        0.5 * acc
    }
}

/// Sample `∂Ω` into a closed counterclockwise polygon: straight bottom, right
/// and top sides, left side at the given step with vertices exactly at kinks.
pub fn boundary_polyline(spec: &DomainSpec, step: f64) -> Result<BoundaryPolygon> {
    if !(step > 0.0 && step <= 0.01 + 1e-15) {
        return Err(Error::InvalidArgument(format!(
            "boundary step must be in (0, 0.01], got {step}"
        )));
    }
    let max_left = (0..=VALIDATION_GRID)
        .map(|i| spec.eta * spec.profile.eval_unchecked(i as f64 / VALIDATION_GRID as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    if max_left >= spec.n {
        return Err(Error::Geometry(format!(
            "left boundary reaches x = {max_left:.3} past the right side N = {}",
            spec.n
        )));
    }

    let mut ys: Vec<f64> = Vec::new();
    let count = (1.0 / step).ceil() as usize;
    ys.extend((0..=count).map(|i| (i as f64 * step).min(1.0)));
    ys.extend(spec.profile.kinks());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut points = Vec::with_capacity(ys.len() + 3);
    points.push([spec.eta * spec.profile.eval_unchecked(0.0), 0.0]);
    points.push([spec.n, 0.0]);
    points.push([spec.n, 1.0]);
    // Left side traversed downward, y = 1 .. 0, excluding the closing corner.
    for &y in ys.iter().rev() {
        if y <= 1e-15 {
            continue;
        }
        points.push([spec.eta * spec.profile.eval_unchecked(y), y]);
    }
    Ok(BoundaryPolygon { points })
}
