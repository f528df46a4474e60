//! Declarative experiment configuration (TOML). CLI flags override individual
//! keys; the file is the archivable record of a campaign.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryProfile, DomainSpec, ProfileKind, SmoothnessClass};
use crate::spectral::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Single,
    EtaScan,
    NScan,
    ResonanceSweep,
    Table1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n: f64,
    pub eta: f64,
    pub profile: ProfileKind,
    #[serde(default = "default_smoothness")]
    pub smoothness: SmoothnessClass,
}

fn default_smoothness() -> SmoothnessClass {
    SmoothnessClass::Lipschitz
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            n: 5.0 / 3.0f64.sqrt(),
            eta: 0.04,
            profile: ProfileKind::Sinusoid {
                frequency: 6,
                phase: crate::geometry::Phase::Sin,
            },
            smoothness: SmoothnessClass::Lipschitz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    /// Vertical node count; when absent, the experiment default applies
    /// (129 for scans and single runs, 257 for the reference-table runs).
    pub n_y: Option<usize>,
    /// Alternative: target mesh size h; wins over the default when set.
    pub target_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub pairs: usize,
    pub max_iterations: usize,
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            pairs: d.pairs,
            max_iterations: d.max_iterations,
            residual_tol: d.residual_tol,
            seed: d.seed,
        }
    }
}

impl SolverConfig {
    pub fn to_options(self) -> SolveOptions {
        SolveOptions {
            pairs: self.pairs,
            max_iterations: self.max_iterations,
            residual_tol: self.residual_tol,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub eta_list: Vec<f64>,
    pub n_list: Vec<f64>,
    pub allow_resonant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Any of `csv`, `json`.
    pub formats: Vec<String>,
    /// Also write an SVG of each run's eigenfunction and nodal set.
    pub render: bool,
    /// Include the two large reference aspect ratios in `table1`.
    pub large_tier: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
            render: false,
            large_tier: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub domain: DomainConfig,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            domain: DomainConfig::default(),
            resolution: ResolutionConfig::default(),
            solver: SolverConfig::default(),
            scan: ScanConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The domain of the base run.
    pub fn domain_spec(&self) -> Result<DomainSpec> {
        DomainSpec::new(
            self.domain.n,
            self.domain.eta,
            BoundaryProfile::new(self.domain.profile.clone(), self.domain.smoothness),
        )
    }

    /// Resolve the vertical node count for this experiment.
    pub fn resolve_n_y(&self) -> usize {
        if let Some(n_y) = self.resolution.n_y {
            return n_y;
        }
        if let Some(h) = self.resolution.target_h {
            // h is the circumdiameter of near-isotropic cells, about √2·dy.
            let dy = h / std::f64::consts::SQRT_2;
            return ((1.0 / dy).ceil() as usize + 1).max(17);
        }
        match self.experiment {
            ExperimentKind::Table1 => 257,
            _ => 129,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain_spec()
            .map_err(|e| Error::Config(format!("domain: {e}")))?;
        if let Some(n_y) = self.resolution.n_y {
            if n_y < 17 {
                return Err(Error::Config(format!("resolution.n_y = {n_y} below 17")));
            }
        }
        if self.solver.pairs == 0 {
            return Err(Error::Config("solver.pairs must be positive".into()));
        }
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        match self.experiment {
            ExperimentKind::EtaScan => {
                if self.scan.eta_list.is_empty() {
                    return Err(Error::Config("eta-scan needs scan.eta_list".into()));
                }
                if !sorted(&self.scan.eta_list) {
                    return Err(Error::Config(
                        "scan.eta_list must be strictly increasing".into(),
                    ));
                }
            }
            ExperimentKind::NScan | ExperimentKind::ResonanceSweep => {
                if self.scan.n_list.is_empty() {
                    return Err(Error::Config(format!(
                        "{:?} needs scan.n_list",
                        self.experiment
                    )));
                }
                if !sorted(&self.scan.n_list) {
                    return Err(Error::Config(
                        "scan.n_list must be strictly increasing".into(),
                    ));
                }
            }
            ExperimentKind::Single | ExperimentKind::Table1 => {}
        }
        for f in &self.outputs.formats {
            if f != "csv" && f != "json" {
                return Err(Error::Config(format!("unknown output format {f:?}")));
            }
        }
        Ok(())
    }
}
