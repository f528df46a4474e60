//! Command-line front end for the perturbed-rectangle experiments.
//!
//! Every subcommand starts from a declarative TOML config (defaults when no
//! `--config` is given) and flags override individual keys. Exit codes:
//! 0 success, 1 one or more runs errored, 2 configuration errors.
//! `NODALGAP_OUT` sets the default output root.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nodalgap::config::{ExperimentConfig, ExperimentKind};
use nodalgap::error::Error;
use nodalgap::geometry::{Phase, ProfileKind};
use nodalgap::modes::{
    hadamard_predict, mode_summary_json, resonance_report, resonance_scan, write_mode_csv,
};
use nodalgap::nodal::{write_nodal_csv, Rect};
use nodalgap::render::{render_svg, RenderOptions};
use nodalgap::report::emit_report;
use nodalgap::runner::{run_experiment, run_single, scan_eta, scan_n, profile_violations};
use nodalgap::spectral::{assemble, solve_near, target_shift, write_spectrum_csv};

#[derive(Parser)]
#[command(name = "nodalgap", version, about = "Dirichlet eigenmodes and nodal-set openings on perturbed rectangles")]
struct Cli {
    /// Experiment config file (TOML). Flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (or set NODALGAP_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Aspect ratio N.
    #[arg(long, global = true)]
    n: Option<f64>,

    /// Perturbation amplitude η.
    #[arg(long, global = true)]
    eta: Option<f64>,

    /// Vertical node count of the mesh.
    #[arg(long, global = true)]
    n_y: Option<usize>,

    /// Profile shorthand: `sin:K`, `cos:K` (sinusoid of frequency K), or `zero`.
    #[arg(long, global = true)]
    profile: Option<String>,

    /// Solver seed (determinism knob).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Permit resonant aspect ratios in scans.
    #[arg(long, global = true)]
    allow_resonant: bool,

    /// Also write an SVG per run.
    #[arg(long, global = true)]
    render: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the eigenproblem and report the selected mode.
    Solve,
    /// Solve, then export the slice-mode decomposition (CSV + JSON summary).
    Modes,
    /// Solve, then export the nodal set polylines and gap measurements.
    Nodal,
    /// Print the first-order boundary predictor (4πη/N)·I_k without solving.
    Predict {
        /// Largest mode index to report.
        #[arg(long, default_value_t = 4)]
        k_max: usize,
    },
    /// Gap-versus-η scan with the log-log slope.
    ScanEta {
        /// Comma-separated amplitudes, e.g. 0.02,0.04,0.08.
        #[arg(long, value_delimiter = ',')]
        etas: Vec<f64>,
    },
    /// Gap-versus-N table at fixed η.
    ScanN {
        /// Comma-separated aspect ratios.
        #[arg(long, value_delimiter = ',')]
        ns: Vec<f64>,
    },
    /// Resonance diagnostics: res(N) and the resonant aspect ratios in range.
    Resonance {
        #[arg(long, default_value_t = 1.2)]
        lo: f64,
        #[arg(long, default_value_t = 6.0)]
        hi: f64,
    },
    /// Reference-table regression (η = 1/2, sin(6πy) boundary).
    Table1 {
        /// Include the two large aspect ratios (memory heavy).
        #[arg(long)]
        large: bool,
    },
    /// Solve and write an SVG of the eigenfunction and nodal set.
    Render {
        /// Output file; defaults to <out>/render.svg.
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(ExperimentKind::Single),
    };
    if let Some(n) = cli.overrides.n {
        cfg.domain.n = n;
    }
    if let Some(eta) = cli.overrides.eta {
        cfg.domain.eta = eta;
    }
    if let Some(n_y) = cli.overrides.n_y {
        cfg.resolution.n_y = Some(n_y);
    }
    if let Some(p) = &cli.overrides.profile {
        cfg.domain.profile = parse_profile(p)?;
    }
    if let Some(seed) = cli.overrides.seed {
        cfg.solver.seed = seed;
    }
    if cli.overrides.allow_resonant {
        cfg.scan.allow_resonant = true;
    }
    if cli.overrides.render {
        cfg.outputs.render = true;
    }
    if let Some(out) = &cli.out {
        cfg.outputs.directory = out.clone();
    } else if let Ok(root) = std::env::var("NODALGAP_OUT") {
        cfg.outputs.directory = PathBuf::from(root);
    }
    Ok(cfg)
}

fn parse_profile(text: &str) -> Result<ProfileKind, Error> {
    if text == "zero" {
        return Ok(ProfileKind::Polynomial {
            coefficients: vec![],
        });
    }
    let (kind, freq) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("profile shorthand {text:?}; want sin:K, cos:K, or zero")))?;
    let frequency: u32 = freq
        .parse()
        .map_err(|_| Error::Config(format!("bad frequency in profile {text:?}")))?;
    let phase = match kind {
        "sin" => Phase::Sin,
        "cos" => Phase::Cos,
        _ => return Err(Error::Config(format!("unknown profile kind {kind:?}"))),
    };
    Ok(ProfileKind::Sinusoid { frequency, phase })
}

fn run(cli: &Cli) -> Result<usize, Error> {
    let mut cfg = build_config(cli)?;
    match &cli.command {
        Command::Solve => {
            cfg.experiment = ExperimentKind::Single;
            cfg.validate()?;
            let spec = cfg.domain_spec()?;
            for v in profile_violations(&spec) {
                eprintln!("profile constraint violated: {v}");
            }
            // Also dump the computed spectrum window next to the reports.
            let mesh = nodalgap::mesh::build_mesh(&spec, cfg.resolve_n_y())?;
            let op = assemble(&mesh)?;
            let sols = solve_near(&op, target_shift(spec.n), &cfg.solver.to_options())?;
            std::fs::create_dir_all(&cfg.outputs.directory)?;
            let f = std::fs::File::create(cfg.outputs.directory.join("spectrum.csv"))?;
            write_spectrum_csv(&sols, f)?;
            let outcome = run_experiment(&cfg)?;
            print_outcome_summary(&outcome);
            Ok(outcome.run_errors)
        }
        Command::Modes => {
            cfg.experiment = ExperimentKind::Single;
            cfg.validate()?;
            let spec = cfg.domain_spec()?;
            let out = run_single(&spec, cfg.resolve_n_y(), &cfg.solver.to_options());
            std::fs::create_dir_all(&cfg.outputs.directory)?;
            if let Some(art) = &out.artifacts {
                if let Some(dec) = &art.decomposition {
                    let f = std::fs::File::create(cfg.outputs.directory.join("modes.csv"))?;
                    write_mode_csv(dec, f)?;
                    let predictor = hadamard_predict(&spec, 1)?;
                    let summary = mode_summary_json(dec, predictor);
                    let path = cfg.outputs.directory.join("modes.json");
                    std::fs::write(&path, serde_json::to_string_pretty(&summary).unwrap())?;
                    println!("{summary}");
                }
            }
            emit_report(&[out.report.clone()], &cfg.outputs.directory, &cfg.outputs.formats)?;
            Ok(usize::from(out.report.error.is_some()))
        }
        Command::Nodal => {
            cfg.experiment = ExperimentKind::Single;
            cfg.validate()?;
            let spec = cfg.domain_spec()?;
            let out = run_single(&spec, cfg.resolve_n_y(), &cfg.solver.to_options());
            std::fs::create_dir_all(&cfg.outputs.directory)?;
            if let Some(art) = &out.artifacts {
                let f = std::fs::File::create(cfg.outputs.directory.join("nodal.csv"))?;
                write_nodal_csv(&art.nodal, f)?;
                println!(
                    "branches: {}, crossing: {}, d: {}, phi: {}",
                    art.nodal.branches.len(),
                    art.nodal.crossing_detected,
                    out.report
                        .d
                        .map_or("na".into(), |d| format!("{d:.6}")),
                    out.report
                        .phi
                        .map_or("na".into(), |p| format!("{p:.4}")),
                );
            }
            emit_report(&[out.report.clone()], &cfg.outputs.directory, &cfg.outputs.formats)?;
            Ok(usize::from(out.report.error.is_some()))
        }
        Command::Predict { k_max } => {
            let spec = cfg.domain_spec()?;
            for k in 1..=*k_max {
                println!("v{k}(0) ~ {}", hadamard_predict(&spec, k)?);
            }
            Ok(0)
        }
        Command::ScanEta { etas } => {
            cfg.experiment = ExperimentKind::EtaScan;
            if !etas.is_empty() {
                cfg.scan.eta_list = etas.clone();
            }
            cfg.validate()?;
            let outcome = scan_eta(&cfg, &cfg.scan.eta_list.clone())?;
            emit_report(&outcome.reports, &cfg.outputs.directory, &cfg.outputs.formats)?;
            match (outcome.slope, outcome.slope_stderr) {
                (Some(s), Some(se)) => println!("log d / log eta slope = {s:.4} +/- {se:.4}"),
                _ => println!("scan degenerate: fewer than 3 genuine openings"),
            }
            Ok(outcome.reports.iter().filter(|r| r.error.is_some()).count())
        }
        Command::ScanN { ns } => {
            cfg.experiment = ExperimentKind::NScan;
            if !ns.is_empty() {
                cfg.scan.n_list = ns.clone();
            }
            cfg.validate()?;
            let outcome = scan_n(&cfg, &cfg.scan.n_list.clone())?;
            emit_report(&outcome.reports, &cfg.outputs.directory, &cfg.outputs.formats)?;
            println!("n,d,mu,sin_mu1_n");
            for row in &outcome.rows {
                println!(
                    "{},{},{},{}",
                    row.n,
                    row.d.map_or("na".into(), |v| v.to_string()),
                    row.mu.map_or("na".into(), |v| v.to_string()),
                    row.sin_mu1_n.map_or("na".into(), |v| v.to_string()),
                );
            }
            Ok(outcome.reports.iter().filter(|r| r.error.is_some()).count())
        }
        Command::Resonance { lo, hi } => {
            let report = resonance_report(cfg.domain.n, 12);
            println!(
                "res(N = {}) = {:.6e}, attained at k = {}",
                cfg.domain.n, report.res_value, report.argmin_k
            );
            let scan = resonance_scan(*lo, *hi, 12)?;
            for (k, nk) in &scan.roots {
                println!("resonant N_{k} = {nk}");
            }
            Ok(0)
        }
        Command::Table1 { large } => {
            cfg.experiment = ExperimentKind::Table1;
            if *large {
                cfg.outputs.large_tier = true;
            }
            cfg.validate()?;
            let outcome = run_experiment(&cfg)?;
            println!("n,d,mu,sin_mu1_n");
            for r in &outcome.reports {
                println!(
                    "{},{},{},{}",
                    r.n,
                    r.d.map_or("na".into(), |v| v.to_string()),
                    r.mu.map_or("na".into(), |v| v.to_string()),
                    r.sin_mu1_n.map_or("na".into(), |v| v.to_string()),
                );
            }
            print_outcome_summary(&outcome);
            Ok(outcome.run_errors)
        }
        Command::Render { file } => {
            cfg.experiment = ExperimentKind::Single;
            cfg.validate()?;
            let spec = cfg.domain_spec()?;
            let out = run_single(&spec, cfg.resolve_n_y(), &cfg.solver.to_options());
            let Some(art) = &out.artifacts else {
                return Err(Error::Numerical(
                    out.report.error.unwrap_or_else(|| "run produced no artifacts".into()),
                ));
            };
            let opts = RenderOptions {
                zoom: Some(Rect::center_window(spec.n)),
                ..Default::default()
            };
            let svg = render_svg(&art.solution.field, &art.nodal, &opts);
            let path = file
                .clone()
                .unwrap_or_else(|| cfg.outputs.directory.join("render.svg"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, svg)?;
            println!("wrote {}", path.display());
            Ok(usize::from(out.report.error.is_some()))
        }
    }
}

fn print_outcome_summary(outcome: &nodalgap::runner::CampaignOutcome) {
    for r in &outcome.reports {
        let status = match &r.error {
            Some(e) => format!("error: {e}"),
            None => "ok".into(),
        };
        println!(
            "run N={} eta={} mu={} d={} [{status}]",
            r.n,
            r.eta,
            r.mu.map_or("na".into(), |v| format!("{v:.4}")),
            r.d.map_or("na".into(), |v| format!("{v:.5}")),
        );
    }
    for path in &outcome.written {
        println!("wrote {path}");
    }
    if let Some(slope) = outcome.eta_slope {
        println!("eta-scan slope {slope:.4}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
