//! Acceptance suite: one pass/fail line per criterion (run with
//! `cargo test --test acceptance -- --nocapture` to watch them live).
//!
//! Criteria run sequentially out of a shared run cache so heavyweight solves
//! are reused. Set `NODALGAP_LARGE_TIER=1` to include the two large reference
//! aspect ratios in criterion 3.

use std::collections::BTreeMap;
use std::time::Instant;

use nodalgap::geometry::{shape_integral, BoundaryProfile, DomainSpec, Phase, ProfileKind, SmoothnessClass};
use nodalgap::mesh::build_mesh;
use nodalgap::runner::{ols_slope, run_single, RunOutput, TABLE1_BASE, TABLE1_LARGE};
use nodalgap::spectral::{assemble, solve_near, target_shift, SolveOptions};

const ETA_SCAN_NY: usize = 129;
const TABLE1_NY: usize = 257;

fn sin6() -> BoundaryProfile {
    BoundaryProfile::new(
        ProfileKind::Sinusoid {
            frequency: 6,
            phase: Phase::Sin,
        },
        SmoothnessClass::Lipschitz,
    )
}

fn cos6() -> BoundaryProfile {
    BoundaryProfile::new(
        ProfileKind::Sinusoid {
            frequency: 6,
            phase: Phase::Cos,
        },
        SmoothnessClass::Lipschitz,
    )
}

fn cos5() -> BoundaryProfile {
    BoundaryProfile::new(
        ProfileKind::Sinusoid {
            frequency: 5,
            phase: Phase::Cos,
        },
        SmoothnessClass::Lipschitz,
    )
}

fn n_ref() -> f64 {
    5.0 / 3.0f64.sqrt()
}

struct Suite {
    cache: BTreeMap<String, RunOutput>,
    failures: Vec<String>,
}

impl Suite {
    fn new() -> Self {
        Self {
            cache: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    fn run(&mut self, n: f64, eta: f64, profile: BoundaryProfile, n_y: usize) -> &RunOutput {
        let key = format!("{}|{}|{}|{}", n, eta, profile.id(), n_y);
        self.cache.entry(key).or_insert_with(|| {
            let spec = DomainSpec::new(n, eta, profile).unwrap();
            let out = run_single(&spec, n_y, &SolveOptions::default());
            if let Some(err) = &out.report.error {
                eprintln!("  [run N={n} eta={eta} n_y={n_y}] notes: {err}");
            }
            out
        })
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) {
        if pass {
            println!("PASS {label}: {detail}");
        } else {
            println!("FAIL {label}: {detail}");
            self.failures.push(format!("{label}: {detail}"));
        }
    }
}

#[test]
fn acceptance_criteria() {
    let mut suite = Suite::new();

    criterion_1(&mut suite);
    criterion_2(&mut suite);
    criterion_3(&mut suite);
    criterion_4(&mut suite);
    criterion_5_and_6(&mut suite);
    criterion_7(&mut suite);
    criterion_8(&mut suite);
    criterion_9(&mut suite);
    criterion_10(&mut suite);
    criterion_11(&mut suite);
    envelope_reports(&mut suite);

    assert!(
        suite.failures.is_empty(),
        "acceptance failures:\n{}",
        suite.failures.join("\n")
    );
}

/// Exact-rectangle spectrum: μ → 5π² at order 2, relative error ≤ 2e-3 at
/// n_y = 129, within 30 s. (N = 2 is the k = 4 resonance, so μ is taken from
/// the pair nearest the shift rather than from signature selection.)
fn criterion_1(suite: &mut Suite) {
    let start = Instant::now();
    let spec = DomainSpec::new(
        2.0,
        0.0,
        BoundaryProfile::new(
            ProfileKind::Polynomial {
                coefficients: vec![],
            },
            SmoothnessClass::C5,
        ),
    )
    .unwrap();
    let exact = 5.0 * std::f64::consts::PI.powi(2);
    let sigma = target_shift(2.0);
    let mut errors = Vec::new();
    let mut hs = Vec::new();
    for n_y in [33usize, 65, 129] {
        let mesh = build_mesh(&spec, n_y).unwrap();
        let op = assemble(&mesh).unwrap();
        let sols = solve_near(&op, sigma, &SolveOptions::default()).unwrap();
        let nearest = sols
            .iter()
            .min_by(|a, b| (a.mu - sigma).abs().total_cmp(&(b.mu - sigma).abs()))
            .unwrap();
        errors.push(((nearest.mu - exact) / exact).abs());
        hs.push(mesh.h);
    }
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(&errors)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let (order, _) = ols_slope(&pts).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (order - 2.0).abs() <= 0.3 && errors[2] <= 2e-3 && elapsed < 30.0;
    suite.check(
        "criterion 1 (exact-rectangle convergence)",
        pass,
        format!(
            "order {order:.2} (target 2.0±0.3), rel err at n_y=129 {:.2e} (≤ 2e-3), {elapsed:.1} s",
            errors[2]
        ),
    );
}

/// Eigenvalue sandwich from domain monotonicity, widened by 10·μ·h².
fn criterion_2(suite: &mut Suite) {
    let (n, eta) = (n_ref(), 0.04);
    let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
    let mu = out.report.mu.unwrap_or(f64::NAN);
    let h = out.report.h;
    let pi2 = std::f64::consts::PI.powi(2);
    let lower = 4.0 * pi2 * (1.0 / ((n + eta) * (n + eta)) + 1.0);
    let upper = 4.0 * pi2 * (1.0 / (n * n) + 1.0);
    let tol_h = 10.0 * mu * h * h;
    let pass = mu >= lower - tol_h && mu <= upper + tol_h;
    suite.check(
        "criterion 2 (eigenvalue sandwich)",
        pass,
        format!("mu {mu:.4} in [{:.4}, {:.4}] (widened by {tol_h:.3})", lower - tol_h, upper + tol_h),
    );
}

/// Reference-table regression: d within ±20%, μ within 1%, |sin(μ₁N)| ≥ 0.999.
fn criterion_3(suite: &mut Suite) {
    let start = Instant::now();
    let mut rows: Vec<(f64, f64, f64)> = TABLE1_BASE.to_vec();
    if std::env::var_os("NODALGAP_LARGE_TIER").is_some() {
        rows.extend_from_slice(&TABLE1_LARGE);
    }
    let mut all_pass = true;
    let mut details = Vec::new();
    let mut gaps = Vec::new();
    for (n, d_ref, mu_ref) in rows {
        let out = suite.run(n, 0.5, sin6(), TABLE1_NY);
        let d = out.report.d.unwrap_or(f64::NAN);
        let mu = out.report.mu.unwrap_or(f64::NAN);
        let smn = out.report.sin_mu1_n.unwrap_or(f64::NAN);
        let ok = (d - d_ref).abs() <= 0.2 * d_ref
            && (mu - mu_ref).abs() <= 0.01 * mu_ref
            && smn >= 0.999;
        all_pass &= ok;
        gaps.push(d);
        details.push(format!(
            "N={n}: d {d:.4} (ref {d_ref}), mu {mu:.4} (ref {mu_ref}), |sin(mu1 N)| {smn:.4}{}",
            if ok { "" } else { " <-- out of tolerance" }
        ));

        // Auxiliary (Prop 1.4 at large η): the measured first-mode scale stays
        // within a factor 3 of the first-order prediction.
        if (n - 10.04).abs() < 0.01 {
            if let Some(art) = &out.artifacts {
                if let Some(dec) = &art.decomposition {
                    let coeff = dec.fit1.map(|f| f.cos_coeff).unwrap_or(dec.v1_at_0);
                    let pred = out.report.v1_at_0_predicted.unwrap_or(f64::NAN);
                    let ratio = (coeff / pred).abs();
                    println!(
                        "  aux: |v1 coeff|/|prediction| at N=10.04, eta=0.5: {ratio:.2} (expect within [1/3, 3])"
                    );
                    all_pass &= (1.0 / 3.0..=3.0).contains(&ratio);
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    // Auxiliary N-independence: gaps differ by less than a factor 1.5.
    if gaps.len() >= 2 {
        let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = gaps.iter().cloned().fold(0.0f64, f64::max);
        all_pass &= hi <= 1.5 * lo;
        details.push(format!("gap spread factor {:.2} (< 1.5)", hi / lo));
    }
    all_pass &= elapsed < 600.0;
    suite.check(
        "criterion 3 (reference-table regression)",
        all_pass,
        format!("{} [{elapsed:.0} s]", details.join("; ")),
    );
}

/// √η scaling of the opening: slope 0.5 ± 0.1 over η ∈ {0.02..0.32}.
fn criterion_4(suite: &mut Suite) {
    let n = n_ref();
    let mut pts = Vec::new();
    for eta in [0.02, 0.04, 0.08, 0.16, 0.32] {
        let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
        if let (Some(false), Some(d)) = (out.report.crossing, out.report.d) {
            pts.push((eta.ln(), d.ln()));
        }
    }
    let fit = ols_slope(&pts);
    let pass = matches!(fit, Some((s, _)) if (s - 0.5).abs() <= 0.1) && pts.len() == 5;
    suite.check(
        "criterion 4 (sqrt-eta gap scaling)",
        pass,
        format!(
            "slope {:?} over {} points (target 0.5±0.1)",
            fit.map(|f| (f.0 * 1e4).round() / 1e4),
            pts.len()
        ),
    );
}

/// Symmetry closure and the vanishing-integral profile: symmetric cos(6πy)
/// keeps a genuine crossing (4 domains, tiny d); cos(5πy) has I₁ = 0 and a
/// much smaller opening than sin(6πy).
fn criterion_5_and_6(suite: &mut Suite) {
    let (n, eta) = (n_ref(), 0.04);
    let d_sin = {
        let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
        out.report.d.unwrap_or(f64::NAN)
    };
    let (d_cos, comp_cos) = {
        let out = suite.run(n, eta, cos6(), ETA_SCAN_NY);
        (
            if out.report.crossing == Some(true) {
                0.0
            } else {
                out.report.d.unwrap_or(f64::NAN)
            },
            out.report.component_count.unwrap_or(0),
        )
    };
    let comp_sin = {
        let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
        out.report.component_count.unwrap_or(0)
    };
    let pass5 = d_cos <= 0.1 * d_sin && comp_cos == 4 && comp_sin == 3;
    suite.check(
        "criterion 5 (symmetry closure)",
        pass5,
        format!(
            "d(cos6) {d_cos:.2e} <= 0.1·d(sin6) {:.2e}; components cos {comp_cos} (=4), sin {comp_sin} (=3)",
            0.1 * d_sin
        ),
    );

    let i1_cos5 = shape_integral(&cos5(), 1).unwrap();
    let d_cos5 = {
        let out = suite.run(n, eta, cos5(), ETA_SCAN_NY);
        if out.report.crossing == Some(true) {
            0.0
        } else {
            out.report.d.unwrap_or(f64::NAN)
        }
    };
    let pass6 = i1_cos5.abs() <= 1e-10 && d_cos5 <= 0.2 * d_sin;
    suite.check(
        "criterion 6 (vanishing-integral profile)",
        pass6,
        format!(
            "I1(cos5) {:.1e} (<=1e-10); d(cos5) {d_cos5:.2e} <= 0.2·d(sin6) {:.2e}",
            i1_cos5,
            0.2 * d_sin
        ),
    );
}

/// Orientation flip across the k = 7 resonance at N = √15: fitted φ jumps
/// between ±π/4 and matches sign(v₂'(N/2)/v₁(N/2)).
fn criterion_7(suite: &mut Suite) {
    let eta = 1.0 / 32.0;
    let quarter = std::f64::consts::FRAC_PI_4;
    let mut phis = Vec::new();
    let mut ok = true;
    let mut details = Vec::new();
    for n in [3.84, 3.90] {
        let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
        let phi = out.report.phi.unwrap_or(f64::NAN);
        let orientation = out
            .artifacts
            .as_ref()
            .and_then(|a| a.decomposition.as_ref())
            .and_then(|d| d.orientation_sign())
            .unwrap_or(f64::NAN);
        let near_quarter = (phi - quarter).abs() <= 0.2 || (phi + quarter).abs() <= 0.2;
        let sign_consistent = phi.signum() == orientation;
        ok &= near_quarter && sign_consistent;
        details.push(format!(
            "N={n}: phi {phi:.3}, sign(v2'/v1) {orientation:+.0}{}",
            if near_quarter && sign_consistent { "" } else { " <-- inconsistent" }
        ));
        phis.push(phi);
    }
    ok &= phis[0].signum() != phis[1].signum();
    suite.check(
        "criterion 7 (resonance orientation flip)",
        ok,
        format!("{} (must flip across sqrt(15))", details.join("; ")),
    );
}

/// First-order boundary predictor: |v₁ coefficient − prediction| decays with
/// slope ≥ 1.5 in η, and matches within 25% at η = 0.01.
fn criterion_8(suite: &mut Suite) {
    let n = n_ref();
    let mut pts = Vec::new();
    let mut at_001 = f64::NAN;
    for eta in [0.01, 0.02, 0.04, 0.08] {
        let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
        let coeff = out
            .artifacts
            .as_ref()
            .and_then(|a| a.decomposition.as_ref())
            .and_then(|d| d.fit1.map(|f| f.cos_coeff));
        let pred = out.report.v1_at_0_predicted;
        if let (Some(c), Some(p)) = (coeff, pred) {
            let gap = (c - p).abs();
            pts.push((eta.ln(), gap.ln()));
            if (eta - 0.01f64).abs() < 1e-12 {
                at_001 = gap / p.abs();
            }
        }
    }
    let fit = ols_slope(&pts);
    let pass = matches!(fit, Some((s, _)) if s >= 1.5) && at_001 <= 0.25 && pts.len() == 4;
    suite.check(
        "criterion 8 (first-order predictor)",
        pass,
        format!(
            "error slope {:?} (>= 1.5); relative miss at eta=0.01: {:.1}% (<= 25%)",
            fit.map(|f| (f.0 * 1e3).round() / 1e3),
            at_001 * 100.0
        ),
    );
}

/// Boundary orthogonality: exactly 4 endpoints; all angles 90° ± 3° at
/// η = 0.05; the worst deviation shrinks as η decreases.
fn criterion_9(suite: &mut Suite) {
    let n = n_ref();
    let angles_at = |suite: &mut Suite, eta: f64| -> Option<Vec<f64>> {
        let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
        out.report.boundary_angles_deg.clone()
    };
    let at_005 = angles_at(suite, 0.05);
    let pass_count = matches!(&at_005, Some(a) if a.len() == 4);
    let pass_ortho = matches!(
        &at_005,
        Some(a) if a.iter().all(|x| (x - 90.0).abs() <= 3.0)
    );
    let max_dev = |angles: &Option<Vec<f64>>| -> f64 {
        angles
            .as_ref()
            .map(|a| a.iter().map(|x| (x - 90.0).abs()).fold(0.0, f64::max))
            .unwrap_or(f64::NAN)
    };
    let devs: Vec<f64> = [0.08, 0.04, 0.02]
        .iter()
        .map(|&eta| {
            let a = angles_at(suite, eta);
            max_dev(&a)
        })
        .collect();
    let monotone = devs[0] >= devs[1] && devs[1] >= devs[2];
    let pass = pass_count && pass_ortho && monotone;
    suite.check(
        "criterion 9 (boundary orthogonality)",
        pass,
        format!(
            "angles at eta=0.05: {:?} (4 endpoints, 90±3); max dev at eta 0.08/0.04/0.02: {:.2}/{:.2}/{:.2} deg (non-increasing)",
            at_005.map(|a| a.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>()),
            devs[0],
            devs[1],
            devs[2]
        ),
    );
}

/// Nodal-domain oracle: mesh sign-graph count equals the raster flood fill on
/// every cached run.
fn criterion_10(suite: &mut Suite) {
    let mut all = true;
    let mut checked = 0;
    let mut detail = String::new();
    for (key, out) in &suite.cache {
        if let (Some(a), Some(b)) = (out.report.component_count, out.report.component_count_raster)
        {
            checked += 1;
            if a != b {
                all = false;
                detail.push_str(&format!(" [{key}: mesh {a} vs raster {b}]"));
            }
        }
    }
    suite.check(
        "criterion 10 (nodal-domain oracle equivalence)",
        all && checked > 0,
        format!("{checked} runs compared{detail}"),
    );
}

/// Mode-form residuals: sup|v₂(x) − sin(2πx/N)| ≤ 5η/N + 10h² and
/// |x* − N/2| ≤ 10η at η = 0.04.
fn criterion_11(suite: &mut Suite) {
    let (n, eta) = (n_ref(), 0.04);
    let out = suite.run(n, eta, sin6(), ETA_SCAN_NY);
    let h = out.report.h;
    let bound = 5.0 * eta / n + 10.0 * h * h;
    let mut sup = f64::NAN;
    if let Some(dec) = out.artifacts.as_ref().and_then(|a| a.decomposition.as_ref()) {
        sup = dec
            .x_grid
            .iter()
            .zip(&dec.modes[1])
            .map(|(&x, &v2)| (v2 - (2.0 * std::f64::consts::PI * x / n).sin()).abs())
            .fold(0.0, f64::max);
    }
    let x_star_dev = out
        .report
        .x_star
        .map(|x| (x - n / 2.0).abs())
        .unwrap_or(f64::NAN);
    let pass = sup <= bound && x_star_dev <= 10.0 * eta;
    suite.check(
        "criterion 11 (mode-form residuals)",
        pass,
        format!(
            "sup|v2 - sin(2πx/N)| {sup:.4} (<= {bound:.4}); |x*-N/2| {x_star_dev:.4} (<= {:.2})",
            10.0 * eta
        ),
    );
}

/// Existential-constant envelopes: fitted run constants stay bounded and
/// stable across the suite (the theorems' A₀/C₀ are not reproducible numbers).
fn envelope_reports(suite: &mut Suite) {
    let mut a0: Vec<f64> = Vec::new();
    let mut g_env: Vec<f64> = Vec::new();
    let mut vertex_ratio_ok = true;
    let mut model_phi_ok = true;
    for out in suite.cache.values() {
        if let Some(v) = out.report.a0_fit {
            a0.push(v);
        }
        if let (Some(false), Some(d), Some(vd)) =
            (out.report.crossing, out.report.d, out.report.vertex_distance)
        {
            if d > 1e-3 {
                vertex_ratio_ok &= vd <= 2.0 * d && d <= 2.0 * vd;
            }
        }
        if out.report.eta <= 0.1 && out.report.res_n > 0.05 {
            if let (Some(phi), Some(mphi)) = (out.report.phi, out.report.model_phi) {
                model_phi_ok &= (phi - mphi).abs() <= 0.1;
            }
        }
        if let Some(art) = &out.artifacts {
            if let Some(dec) = &art.decomposition {
                let checks = nodalgap::nodal::theorem_checks(
                    &art.solution.field,
                    &art.nodal,
                    dec,
                    50,
                );
                if let Some(g) = checks.g_envelope {
                    g_env.push(g);
                }
            }
        }
    }
    let a0_max = a0.iter().cloned().fold(0.0f64, f64::max);
    let g_max = g_env.iter().cloned().fold(0.0f64, f64::max);
    let pass = a0_max.is_finite() && g_max <= 50.0 && vertex_ratio_ok && model_phi_ok;
    suite.check(
        "envelope reports (A0/C0 run-constants)",
        pass,
        format!(
            "max A0 {a0_max:.2}, max |g'|(y-1/2)^2/eta {g_max:.2} (<= 50), vertex-vs-d within x2: {vertex_ratio_ok}, model-vs-data phi within 0.1 rad: {model_phi_ok}"
        ),
    );
}
