//! Dirichlet eigenmodes on rectangles with one perturbed side.
//!
//! The library computes the eigenfunction sitting in the spectral position of
//! the (2,2) rectangle mode on domains
//! `Ω = {(x, y) : y ∈ [0,1], η·φ_L(y) ≤ x ≤ N}`, extracts its nodal set, and
//! quantifies how the boundary perturbation opens the former nodal crossing:
//! the opening scale `~√η` independent of the aspect ratio, the `±π/4`
//! hyperbola orientation controlled by `sign(v₂'(N/2)/v₁(N/2))`, the
//! first-order boundary predictor `v_k(0) ≈ (4πη/N)·I_k`, and the orthogonal
//! boundary intersections.
//!
//! Pipeline: [`geometry`] (profiles, shape integrals) → [`mesh`] (transfinite
//! triangulation) → [`spectral`] (shift-invert Lanczos) → [`modes`] (slice
//! Fourier analysis) → [`nodal`] (zero set, gap, hyperbola fits) → [`exp`]
//! (experiment campaigns, reports, rendering).

pub mod config;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod modes;
pub mod nodal;
pub mod render;
pub mod report;
pub mod runner;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
