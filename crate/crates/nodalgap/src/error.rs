//! Error type shared by every module of the crate.

use std::fmt;

use crate::modes::ResonanceReport;

/// Errors produced by the geometry / mesh / solver / analysis pipeline.
#[derive(Debug)]
pub enum Error {
    /// A precondition on an operation argument was violated.
    InvalidArgument(String),
    /// A query point lies outside the domain (beyond the 1e-9 tolerance).
    PointOutsideDomain { x: f64, y: f64 },
    /// Degenerate or self-intersecting geometry (e.g. `eta >= N`).
    Geometry(String),
    /// A numerical procedure failed to converge or broke down.
    Numerical(String),
    /// An operation hit a resonant aspect ratio and cannot proceed.
    Resonance(ResonanceReport),
    /// No eigenfunction candidate matched the target mode signature.
    ModeSelection {
        detail: String,
        diagnosis: ResonanceReport,
    },
    /// The field does not carry the expected quadrant sign pattern.
    Signature(String),
    /// The nodal set does not have the expected branch/endpoint structure.
    NodalTopology { expected: usize, found: usize },
    /// The quadric fit is not a hyperbola (det H >= 0).
    FitDegenerate { det_h: f64 },
    /// Too few samples to perform a fit.
    InsufficientData { needed: usize, got: usize },
    /// Configuration file is missing, malformed, or inconsistent.
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Self::PointOutsideDomain { x, y } => {
                write!(f, "point ({x}, {y}) lies outside the domain")
            }
            Self::Geometry(msg) => write!(f, "degenerate geometry: {msg}"),
            Self::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Self::Resonance(report) => write!(
                f,
                "resonant aspect ratio: res(N) = {:.3e} attained at k = {}",
                report.res_value, report.argmin_k
            ),
            Self::ModeSelection { detail, diagnosis } => write!(
                f,
                "mode selection failed: {detail} (res(N) = {:.3e} at k = {})",
                diagnosis.res_value, diagnosis.argmin_k
            ),
            Self::Signature(msg) => write!(f, "sign pattern mismatch: {msg}"),
            Self::NodalTopology { expected, found } => {
                write!(f, "nodal topology: expected {expected} branches/endpoints, found {found}")
            }
            Self::FitDegenerate { det_h } => {
                write!(f, "quadric fit is not hyperbolic: det H = {det_h:.3e}")
            }
            Self::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need {needed} samples, got {got}")
            }
            Self::Config(msg) => write!(f, "config error: {msg}"),
            Self::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Self::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
