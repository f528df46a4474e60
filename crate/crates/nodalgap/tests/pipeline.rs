//! End-to-end pipeline tests at desk scale: config-driven campaigns, report
//! wire formats, determinism, campaign isolation, and the mid-resolution
//! structure bounds on a single perturbed run.

use nodalgap::config::{ExperimentConfig, ExperimentKind};
use nodalgap::geometry::{BoundaryProfile, DomainSpec, Phase, ProfileKind, SmoothnessClass};
use nodalgap::modes::write_mode_csv;
use nodalgap::nodal::write_nodal_csv;
use nodalgap::report::{read_json, CSV_HEADER};
use nodalgap::runner::{run_experiment, run_single, scan_eta};
use nodalgap::spectral::SolveOptions;

fn sin6() -> BoundaryProfile {
    BoundaryProfile::new(
        ProfileKind::Sinusoid {
            frequency: 6,
            phase: Phase::Sin,
        },
        SmoothnessClass::Lipschitz,
    )
}

fn base_config(dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Single);
    cfg.domain.n = 2.5;
    cfg.domain.eta = 0.04;
    cfg.domain.profile = ProfileKind::Sinusoid {
        frequency: 6,
        phase: Phase::Sin,
    };
    cfg.resolution.n_y = Some(33);
    cfg.outputs.directory = dir.to_path_buf();
    cfg.outputs.render = true;
    cfg
}

/// Strip the wall-time column (always last) before byte comparison.
fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(idx) => &line[..idx],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn single_experiment_writes_deterministic_outputs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let out_a = run_experiment(&base_config(dir_a.path())).unwrap();
    let out_b = run_experiment(&base_config(dir_b.path())).unwrap();
    assert_eq!(out_a.run_errors, 0, "reports: {:?}", out_a.reports[0].error);
    assert_eq!(out_b.run_errors, 0);

    let csv_a = std::fs::read_to_string(dir_a.path().join("reports.csv")).unwrap();
    let csv_b = std::fs::read_to_string(dir_b.path().join("reports.csv")).unwrap();
    assert!(csv_a.starts_with(CSV_HEADER));
    assert_eq!(strip_wall_time(&csv_a), strip_wall_time(&csv_b));

    // JSON round-trips to the same reports, and identical reports rewrite to
    // identical bytes.
    let json_a = std::fs::read_to_string(dir_a.path().join("reports.json")).unwrap();
    let reports = read_json(&json_a).unwrap();
    assert_eq!(reports.len(), 1);
    let mut rewritten = Vec::new();
    nodalgap::report::write_json(&reports, &mut rewritten).unwrap();
    assert_eq!(json_a.as_bytes(), rewritten.as_slice());

    // SVG renders are byte-identical across runs.
    let svg_name = |dir: &std::path::Path| {
        std::fs::read_dir(dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .find(|e| e.path().extension().is_some_and(|x| x == "svg"))
            .map(|e| e.path())
            .expect("an svg was rendered")
    };
    let svg_a = std::fs::read(svg_name(dir_a.path())).unwrap();
    let svg_b = std::fs::read(svg_name(dir_b.path())).unwrap();
    assert_eq!(svg_a, svg_b);
}

#[test]
fn failing_run_does_not_abort_siblings() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base_config(dir.path());
    cfg.experiment = ExperimentKind::NScan;
    cfg.outputs.render = false;
    // N = 0.5 violates the aspect-ratio invariant; N = 2.5 is fine.
    cfg.scan.n_list = vec![0.5, 2.5];
    cfg.scan.allow_resonant = true;
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.reports.len(), 2);
    assert_eq!(outcome.run_errors, 1);
    let failed = outcome.reports.iter().find(|r| r.n == 0.5).unwrap();
    assert!(failed.error.is_some());
    let good = outcome.reports.iter().find(|r| r.n == 2.5).unwrap();
    assert!(good.error.is_none(), "{:?}", good.error);
    assert!(good.mu.is_some());
}

#[test]
fn eta_scan_guards_resonant_aspect_ratios() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::EtaScan);
    cfg.domain.n = 2.0; // the k = 4 resonance
    cfg.scan.eta_list = vec![0.02, 0.04, 0.08];
    cfg.resolution.n_y = Some(33);
    match scan_eta(&cfg, &cfg.scan.eta_list.clone()) {
        Err(nodalgap::Error::Resonance(report)) => {
            assert_eq!(report.argmin_k, 4);
        }
        other => panic!("expected resonance refusal, got {other:?}"),
    }
}

#[test]
fn eta_scan_needs_three_points_and_reports_symmetric_degeneracy() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::EtaScan);
    cfg.domain.n = 2.5;
    cfg.resolution.n_y = Some(33);
    assert!(scan_eta(&cfg, &[0.04]).is_err());

    // Symmetric profile: openings are solver noise, the scan is degenerate.
    cfg.domain.profile = ProfileKind::Sinusoid {
        frequency: 6,
        phase: Phase::Cos,
    };
    let outcome = scan_eta(&cfg, &[0.02, 0.04, 0.08]).unwrap();
    assert!(outcome.degenerate);
    assert!(outcome.slope.is_none());
}

#[test]
fn perturbed_run_obeys_structure_bounds() {
    // Mid-resolution single run carrying the Fourier-mode and hyperbola
    // invariants: the eigenvalue sandwich, the v2 trig residual, the supremum
    // of the error field, the center identity, the vertex-vs-gap factor, and
    // the model-vs-data angle agreement.
    let n = 5.0 / 3.0f64.sqrt();
    let eta = 0.04;
    let spec = DomainSpec::new(n, eta, sin6()).unwrap();
    let out = run_single(&spec, 65, &SolveOptions::default());
    assert!(out.report.error.is_none(), "{:?}", out.report.error);
    let art = out.artifacts.as_ref().unwrap();
    let dec = art.decomposition.as_ref().unwrap();
    let h = out.report.h;
    let mu = out.report.mu.unwrap();
    let pi = std::f64::consts::PI;

    // Lemma-style sandwich with the h² widening.
    let lower = 4.0 * pi * pi * (1.0 / ((n + eta) * (n + eta)) + 1.0) - 10.0 * mu * h * h;
    let upper = 4.0 * pi * pi * (1.0 / (n * n) + 1.0) + 10.0 * mu * h * h;
    assert!(mu >= lower && mu <= upper, "mu {mu} outside [{lower}, {upper}]");

    // Trig-fit residual bound for v2 on the fit window.
    let fit2 = dec.fit2.unwrap();
    let bound = 5.0 * eta / n + 10.0 * h * h;
    assert!(
        fit2.residual_sup <= bound,
        "v2 fit residual {} above {bound}",
        fit2.residual_sup
    );

    // Error field: E_sup ≤ 10·η/N.
    assert!(
        dec.e_sup <= 10.0 * eta / n,
        "E_sup {} above {}",
        dec.e_sup,
        10.0 * eta / n
    );

    // Center identity |v1(N/2)|/|v1(0)| within the cos(μ₁N/2) band.
    let fit1 = dec.fit1.unwrap();
    let c_half = (dec.mu1 * n / 2.0).cos().abs();
    let c = 1.0 / (2.0 * c_half) + 0.5;
    let ratio = (dec.v1_at_center.unwrap() / fit1.cos_coeff).abs();
    assert!(
        ratio >= 1.0 / (2.0 * c) && ratio <= c,
        "|v1(N/2)|/|v1(0)| = {ratio} outside [{}, {c}]",
        1.0 / (2.0 * c)
    );

    // Hyperbola shape: the vertex distance tracks the measured gap and the
    // model angle tracks the data angle.
    let d = out.report.d.unwrap();
    let vd = out.report.vertex_distance.unwrap();
    assert!(vd <= 2.0 * d && d <= 2.0 * vd, "vertex {vd} vs gap {d}");
    let phi = out.report.phi.unwrap();
    let mphi = out.report.model_phi.unwrap();
    assert!((phi - mphi).abs() <= 0.1, "phi {phi} vs model {mphi}");

    // Component counting agrees with the raster oracle; the opening merges two
    // of the four domains.
    assert_eq!(out.report.component_count, Some(3));
    assert_eq!(out.report.component_count_raster, Some(3));

    // The exporters stay consistent with the artifacts.
    let mut csv = Vec::new();
    write_mode_csv(dec, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), dec.x_grid.len() + 1);
    assert!(text.starts_with("x,v1,v2"));

    let mut csv = Vec::new();
    write_nodal_csv(&art.nodal, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let total_points: usize = art.nodal.branches.iter().map(|b| b.points.len()).sum();
    assert_eq!(text.lines().count(), total_points + 1);
}

#[test]
fn mesh_dump_round_trips_through_text() {
    let spec = DomainSpec::new(2.0, 0.04, sin6()).unwrap();
    let mesh = nodalgap::mesh::build_mesh(&spec, 17).unwrap();
    let mut buf = Vec::new();
    mesh.write_text(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(' ').collect();
    assert_eq!(header[1], "T");
    let n_nodes: usize = header[0].parse().unwrap();
    let n_tris: usize = header[2].parse().unwrap();
    assert_eq!(n_nodes, mesh.nodes.len());
    assert_eq!(n_tris, mesh.triangles.len());
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(' ').collect();
        assert_eq!(parts.len(), if i < n_nodes { 2 } else { 3 });
        if i < n_nodes {
            let x: f64 = parts[0].parse().unwrap();
            let y: f64 = parts[1].parse().unwrap();
            assert_eq!([x, y], mesh.nodes[i]);
        }
    }
}

#[test]
fn config_file_drives_the_cli_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!(
        r#"
experiment = "single"

[domain]
n = 2.5
eta = 0.04

[domain.profile]
kind = "sinusoid"
frequency = 6
phase = "sin"

[resolution]
n_y = 33

[outputs]
directory = "{}"
formats = ["csv", "json"]
"#,
        dir.path().display()
    );
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, toml).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.run_errors, 0);
    assert!(dir.path().join("reports.csv").exists());
    assert!(dir.path().join("reports.json").exists());
}
