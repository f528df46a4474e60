//! Per-run records and their CSV/JSON serialization.
//!
//! The CSV schema is fixed: one header row, `.` decimal separator, `na` for
//! fields that do not apply to a run, boundary angles joined by `;` inside one
//! cell, and the wall time always in the last column so determinism checks can
//! strip it.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JSON_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "n,eta,profile,smoothness,n_y,h,min_angle_deg,res_n,mu,residual,mu1,sin_mu1_n,crossing,d,phi,vertex_distance,model_phi,x_star,v1_at_0_measured,v1_coeff_fitted,v1_at_0_predicted,e_sup,strip_halfwidth,a0_fit,component_count,component_count_raster,micro_components,boundary_angles_deg,notes,error,wall_time_s";

/// Everything measured in one pipeline run. `None` means not applicable
/// (written as `na` in CSV, `null` in JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: f64,
    pub eta: f64,
    pub profile: String,
    pub smoothness: String,
    pub n_y: usize,
    pub h: f64,
    pub min_angle_deg: f64,
    pub res_n: f64,
    pub mu: Option<f64>,
    pub residual: Option<f64>,
    pub mu1: Option<f64>,
    pub sin_mu1_n: Option<f64>,
    pub crossing: Option<bool>,
    pub d: Option<f64>,
    pub phi: Option<f64>,
    pub vertex_distance: Option<f64>,
    pub model_phi: Option<f64>,
    pub x_star: Option<f64>,
    /// Slice integral of the field at x = 0 (zero outside Ω).
    pub v1_at_0_measured: Option<f64>,
    /// Cosine coefficient of the fitted closed form, the quantity the
    /// first-order predictor approximates.
    pub v1_coeff_fitted: Option<f64>,
    pub v1_at_0_predicted: Option<f64>,
    pub e_sup: Option<f64>,
    pub strip_halfwidth: Option<f64>,
    pub a0_fit: Option<f64>,
    pub component_count: Option<usize>,
    pub component_count_raster: Option<usize>,
    /// Sliver components below the area threshold, reported for transparency.
    pub micro_components: Option<usize>,
    pub boundary_angles_deg: Option<Vec<f64>>,
    /// Partial analyses that were skipped (e.g. trig fit at a resonant N);
    /// the run itself still counts as successful.
    pub notes: Option<String>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

fn cell_f64(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "na".into(),
    }
}

impl RunReport {
    pub fn csv_row(&self) -> String {
        let angles = match &self.boundary_angles_deg {
            Some(a) => a
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(";"),
            None => "na".into(),
        };
        let error = match &self.error {
            Some(e) => e.replace([',', '\n'], ";"),
            None => "na".into(),
        };
        [
            format!("{}", self.n),
            format!("{}", self.eta),
            self.profile.clone(),
            self.smoothness.clone(),
            format!("{}", self.n_y),
            format!("{}", self.h),
            format!("{}", self.min_angle_deg),
            format!("{}", self.res_n),
            cell_f64(self.mu),
            cell_f64(self.residual),
            cell_f64(self.mu1),
            cell_f64(self.sin_mu1_n),
            match self.crossing {
                Some(b) => format!("{b}"),
                None => "na".into(),
            },
            cell_f64(self.d),
            cell_f64(self.phi),
            cell_f64(self.vertex_distance),
            cell_f64(self.model_phi),
            cell_f64(self.x_star),
            cell_f64(self.v1_at_0_measured),
            cell_f64(self.v1_coeff_fitted),
            cell_f64(self.v1_at_0_predicted),
            cell_f64(self.e_sup),
            cell_f64(self.strip_halfwidth),
            cell_f64(self.a0_fit),
            match self.component_count {
                Some(c) => format!("{c}"),
                None => "na".into(),
            },
            match self.component_count_raster {
                Some(c) => format!("{c}"),
                None => "na".into(),
            },
            match self.micro_components {
                Some(c) => format!("{c}"),
                None => "na".into(),
            },
            angles,
            match &self.notes {
                Some(n) => n.replace([',', '\n'], ";"),
                None => "na".into(),
            },
            error,
            format!("{}", self.wall_time_s),
        ]
        .join(",")
    }
}

pub fn write_csv<W: Write>(reports: &[RunReport], mut w: W) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to write".into()));
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEnvelope {
    schema_version: u32,
    reports: Vec<RunReport>,
}

pub fn write_json<W: Write>(reports: &[RunReport], w: W) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to write".into()));
    }
    let envelope = JsonEnvelope {
        schema_version: JSON_SCHEMA_VERSION,
        reports: reports.to_vec(),
    };
    serde_json::to_writer_pretty(w, &envelope)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

pub fn read_json(text: &str) -> Result<Vec<RunReport>> {
    let envelope: JsonEnvelope =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if envelope.schema_version != JSON_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported report schema version {}",
            envelope.schema_version
        )));
    }
    Ok(envelope.reports)
}

/// Write the requested formats into `dir` as `reports.csv` / `reports.json`.
pub fn emit_report(reports: &[RunReport], dir: &Path, formats: &[String]) -> Result<Vec<String>> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to write".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        match f.as_str() {
            "csv" => {
                let path = dir.join("reports.csv");
                write_csv(reports, std::fs::File::create(&path)?)?;
                written.push(path.display().to_string());
            }
            "json" => {
                let path = dir.join("reports.json");
                write_json(reports, std::fs::File::create(&path)?)?;
                written.push(path.display().to_string());
            }
            other => return Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
    Ok(written)
}
