//! Dirichlet eigenproblem on the mesh: P1 assembly, shifted factorization,
//! shift-invert Lanczos with full reorthogonalization in the M-inner product,
//! and selection of the mode sitting in the spectral position of the (2,2)
//! rectangle eigenfunction.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::mesh::{interpolate_field, Mesh, NodalField};
use crate::modes::{resonance_report, ResonanceReport};
use crate::sparse::{reverse_cuthill_mckee, BandedLdlt, SparseSym};

/// Aspect ratios with `res(N)` below this are flagged as resonance-unstable.
pub const RESONANCE_GUARD: f64 = 0.05;

/// The shift targeting the spectral position of the (2,2) mode.
pub fn target_shift(n: f64) -> f64 {
    4.0 * std::f64::consts::PI.powi(2) * (1.0 / (n * n) + 1.0)
}

/// Stiffness and mass on the Dirichlet-interior unknowns, plus the index maps
/// back to mesh nodes.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    pub stiffness: SparseSym,
    pub mass: SparseSym,
    /// Mesh node id of each unknown.
    pub interior: Vec<u32>,
    /// Unknown id per mesh node (`None` on the boundary).
    pub dof_of_node: Vec<Option<u32>>,
    pub mesh: Arc<Mesh>,
}

impl DirichletOperator {
    pub fn dim(&self) -> usize {
        self.stiffness.dim
    }

    /// Expand an interior vector to a full nodal field (zero on the boundary).
    pub fn inflate(&self, x: &[f64]) -> NodalField {
        let mut values = vec![0.0; self.mesh.nodes.len()];
        for (dof, &node) in self.interior.iter().enumerate() {
            values[node as usize] = x[dof];
        }
        NodalField {
            mesh: self.mesh.clone(),
            values,
        }
    }
}

fn element_matrices(mesh: &Mesh, t: usize) -> Result<([[f64; 3]; 3], [[f64; 3]; 3])> {
    let [a, b, c] = mesh.triangles[t];
    let pa = mesh.nodes[a as usize];
    let pb = mesh.nodes[b as usize];
    let pc = mesh.nodes[c as usize];
    let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::Geometry(format!(
            "element {t} has non-positive Jacobian ({det:.3e})"
        )));
    }
    let area = 0.5 * det;
    // Gradients of the barycentric shape functions.
    let g = [
        [(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det],
        [(pc[1] - pa[1]) / det, (pa[0] - pc[0]) / det],
        [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det],
    ];
    let mut ke = [[0.0; 3]; 3];
    let mut me = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ke[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            me[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    Ok((ke, me))
}

/// Assemble stiffness and consistent mass over all mesh nodes, no boundary
/// conditions applied.
pub fn assemble_full(mesh: &Mesh) -> Result<(SparseSym, SparseSym)> {
    let n = mesh.nodes.len();
    let mut kt = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let (ke, me) = element_matrices(mesh, t)?;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                kt.push((tri[i], tri[j], ke[i][j]));
                mt.push((tri[i], tri[j], me[i][j]));
            }
        }
    }
    Ok((
        SparseSym::from_triplets(n, &mut kt),
        SparseSym::from_triplets(n, &mut mt),
    ))
}

/// Assemble with Dirichlet rows/columns eliminated.
pub fn assemble(mesh: &Arc<Mesh>) -> Result<DirichletOperator> {
    let n = mesh.nodes.len();
    let mut dof_of_node = vec![None; n];
    let mut interior = Vec::new();
    for node in 0..n {
        if !mesh.boundary[node] {
            dof_of_node[node] = Some(interior.len() as u32);
            interior.push(node as u32);
        }
    }
    let dim = interior.len();
    let mut kt = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let (ke, me) = element_matrices(mesh, t)?;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            let Some(di) = dof_of_node[tri[i] as usize] else {
                continue;
            };
            for j in 0..3 {
                let Some(dj) = dof_of_node[tri[j] as usize] else {
                    continue;
                };
                kt.push((di, dj, ke[i][j]));
                mt.push((di, dj, me[i][j]));
            }
        }
    }
    Ok(DirichletOperator {
        stiffness: SparseSym::from_triplets(dim, &mut kt),
        mass: SparseSym::from_triplets(dim, &mut mt),
        interior,
        dof_of_node,
        mesh: mesh.clone(),
    })
}

/// Reusable factorization of `K − σM`.
pub struct ShiftedFactor {
    pub sigma: f64,
    ldlt: BandedLdlt,
}

impl ShiftedFactor {
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        self.ldlt.solve(b, x);
    }

    /// Number of discrete eigenvalues below the shift (Sylvester inertia).
    pub fn eigenvalues_below_shift(&self) -> usize {
        self.ldlt.negative_inertia()
    }
}

/// Factor `K − σM` with a reverse Cuthill-McKee ordering. Fails if σ is
/// numerically at a discrete eigenvalue (vanishing pivot).
pub fn factorize_shifted(k: &SparseSym, m: &SparseSym, sigma: f64) -> Result<ShiftedFactor> {
    let shifted = SparseSym::combine(k, 1.0, m, -sigma);
    let perm = reverse_cuthill_mckee(&shifted);
    let ldlt = BandedLdlt::factor(&shifted, perm)?;
    Ok(ShiftedFactor { sigma, ldlt })
}

/// Dominant slice mode and sign-change counts used to recognize the target
/// eigenfunction independent of its position in the computed window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSignature {
    pub dominant_k: usize,
    pub sign_changes_x: usize,
    pub sign_changes_y: usize,
}

impl ModeSignature {
    pub fn matches_two_two(&self) -> bool {
        self.dominant_k == 2 && self.sign_changes_x == 1 && self.sign_changes_y == 1
    }
}

fn count_sign_changes(values: &[f64]) -> usize {
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return 0;
    }
    let threshold = 0.05 * max_abs;
    let mut last = 0i32;
    let mut changes = 0;
    for &v in values {
        if v.abs() < threshold {
            continue;
        }
        let s = if v > 0.0 { 1 } else { -1 };
        if last != 0 && s != last {
            changes += 1;
        }
        last = s;
    }
    changes
}

/// Classify a field on the structured grid: dominant vertical Fourier index by
/// energy, and sign-change counts along lines through the quarter points.
pub fn mode_signature(field: &NodalField) -> ModeSignature {
    let mesh = &field.mesh;
    let (n_x, n_y) = (mesh.n_x, mesh.n_y);
    let dy = 1.0 / (n_y - 1) as f64;
    let k_max = 6;
    let mut energy = vec![0.0f64; k_max + 1];
    for ix in 0..n_x {
        for k in 1..=k_max {
            let mut vk = 0.0;
            for iy in 1..n_y - 1 {
                let y = iy as f64 * dy;
                vk += field.values[mesh.node_index(ix, iy)]
                    * (k as f64 * std::f64::consts::PI * y).sin();
            }
            energy[k] += (2.0 * dy * vk).powi(2);
        }
    }
    let dominant_k = (1..=k_max)
        .max_by(|&a, &b| energy[a].total_cmp(&energy[b]))
        .unwrap_or(1);

    let jq = ((n_y - 1) as f64 * 0.25).round() as usize;
    let row: Vec<f64> = (0..n_x)
        .map(|ix| field.values[mesh.node_index(ix, jq)])
        .collect();
    let iq = ((n_x - 1) as f64 * 0.25).round() as usize;
    let column: Vec<f64> = (0..n_y)
        .map(|iy| field.values[mesh.node_index(iq, iy)])
        .collect();
    ModeSignature {
        dominant_k,
        sign_changes_x: count_sign_changes(&row),
        sign_changes_y: count_sign_changes(&column),
    }
}

/// One converged eigenpair.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub mu: f64,
    pub field: NodalField,
    /// `‖Kv − μMv‖₂ / ‖v‖_M`.
    pub residual: f64,
    /// Rank of μ in the computed window (ascending).
    pub position_index: usize,
    pub signature: ModeSignature,
    /// Set by [`select_mode`] when the aspect ratio sits close to a resonance.
    pub resonance_warning: Option<ResonanceReport>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Number of eigenpairs to return.
    pub pairs: usize,
    pub max_iterations: usize,
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            pairs: 8,
            max_iterations: 500,
            residual_tol: 1e-8,
            seed: 12345,
        }
    }
}

struct MInner<'a> {
    m: &'a SparseSym,
    scratch: Vec<f64>,
}

impl<'a> MInner<'a> {
    fn new(m: &'a SparseSym) -> Self {
        Self {
            m,
            scratch: vec![0.0; m.dim],
        }
    }

    fn apply(&mut self, x: &[f64]) -> &[f64] {
        let mut scratch = std::mem::take(&mut self.scratch);
        self.m.matvec(x, &mut scratch);
        self.scratch = scratch;
        &self.scratch
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn tridiag_eigen(alphas: &[f64], betas: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    crate::eigen::tridiagonal_eigen(alphas, betas)
}

/// Shift-invert Lanczos on `(K − σM)⁻¹M` with full reorthogonalization in the
/// M-inner product. Returns the `pairs` eigenpairs nearest σ, ascending in μ,
/// each with residual at most `residual_tol`.
pub fn solve_near(
    op: &DirichletOperator,
    sigma: f64,
    opts: &SolveOptions,
) -> Result<Vec<EigenSolution>> {
    if opts.pairs < 1 {
        return Err(Error::InvalidArgument("need at least one eigenpair".into()));
    }
    let k = &op.stiffness;
    let m = &op.mass;
    let n = op.dim();
    if n == 0 {
        return Err(Error::Geometry("no interior unknowns".into()));
    }
    let want = opts.pairs.min(n);

    // Factor K − σM, nudging the shift off a discrete eigenvalue if needed.
    let mut sigma_try = sigma;
    let mut factor = None;
    for _ in 0..5 {
        match factorize_shifted(k, m, sigma_try) {
            Ok(f) => {
                factor = Some(f);
                break;
            }
            Err(Error::Numerical(_)) => {
                sigma_try += 1e-6 * sigma.abs().max(1.0);
            }
            Err(e) => return Err(e),
        }
    }
    let factor = factor.ok_or_else(|| {
        Error::Numerical("factorization failed after repeated shift perturbations".into())
    })?;
    let sigma = factor.sigma;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut minner = MInner::new(m);
    let max_iter = opts.max_iterations.min(n);
    let trace = std::env::var_os("NODALGAP_TRACE").is_some();

    // Sequential extraction with soft deflation: each round runs a fresh
    // Lanczos recurrence kept M-orthogonal to the locked pairs and converges
    // the dominant |θ| of the deflated operator. Near-singular shifts (σ very
    // close to an eigenvalue) then cannot poison the remaining pairs, and
    // degenerate clusters are resolved one copy per round.
    let mut locked: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let mut locked_mz: Vec<Vec<f64>> = Vec::new();
    let mut steps_used = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut stalled_rounds = 0usize;

    'rounds: while locked.len() < want {
        if steps_used >= max_iter {
            return Err(Error::Numerical(format!(
                "Lanczos did not reach residual {:.1e} within {} iterations \
                 ({} pairs locked, best stalled residual {:.3e})",
                opts.residual_tol,
                opts.max_iterations,
                locked.len(),
                best_residual
            )));
        }

        // Start vector orthogonal to everything already locked.
        let mut q0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for ((_, z, _), mz) in locked.iter().zip(&locked_mz) {
                let c = dot(&q0, mz);
                axpy(&mut q0, -c, z);
            }
        }
        let norm = dot(&q0, minner.apply(&q0)).sqrt();
        if norm < 1e-300 {
            return Err(Error::Numerical("deflated start vector vanished".into()));
        }
        for v in &mut q0 {
            *v /= norm;
        }

        let mut basis: Vec<Vec<f64>> = vec![q0];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut gate = 1e-10;

        while steps_used < max_iter {
            steps_used += 1;
            let j = alphas.len();
            let qj = basis[j].clone();
            let mqj = minner.apply(&qj).to_vec();
            let mut w = factor.ldlt.solve_alloc(&mqj);
            if j > 0 {
                let beta_prev = betas[j - 1];
                let q_prev = basis[j - 1].clone();
                axpy(&mut w, -beta_prev, &q_prev);
            }
            let alpha = dot(&w, &mqj);
            axpy(&mut w, -alpha, &qj);
            alphas.push(alpha);

            // Full reorthogonalization against the locked pairs and the
            // current basis; one pass, repeated on heavy cancellation.
            let norm_before = dot(&w, minner.apply(&w)).sqrt();
            for _ in 0..2 {
                for ((_, z, _), mz) in locked.iter().zip(&locked_mz) {
                    let c = dot(&w, mz);
                    axpy(&mut w, -c, z);
                }
                let mw = minner.apply(&w).to_vec();
                let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, &mw)).collect();
                for (q, c) in basis.iter().zip(&coeffs) {
                    axpy(&mut w, -c, q);
                }
                let norm_after = dot(&w, minner.apply(&w)).sqrt();
                if norm_after > 0.5 * norm_before {
                    break;
                }
            }

            let beta = dot(&w, minner.apply(&w)).sqrt();
            if !beta.is_finite() {
                return Err(Error::Numerical("Lanczos recurrence diverged".into()));
            }
            let scale = alphas.iter().fold(1.0f64, |s, a| s.max(a.abs()));
            let breakdown = beta <= 1e-13 * scale;
            if !breakdown {
                betas.push(beta);
                let mut q_next = w;
                for v in &mut q_next {
                    *v /= beta;
                }
                basis.push(q_next);
            } else {
                betas.push(0.0);
            }

            let steps = alphas.len();
            if steps >= 2 && (steps % 2 == 0 || breakdown) {
                let (thetas, vecs) = tridiag_eigen(&alphas, &betas[..steps - 1])?;
                let top = (0..steps)
                    .max_by(|&a, &b| thetas[a].abs().total_cmp(&thetas[b].abs()))
                    .unwrap();
                let bound = betas[steps - 1] * vecs[top][steps - 1].abs();
                if trace {
                    eprintln!(
                        "lanczos round {} step {steps}: theta {:.4} bound {bound:.1e}",
                        locked.len(),
                        thetas[top]
                    );
                }
                if bound <= gate * thetas[top].abs().max(1e-30) || breakdown {
                    let theta = thetas[top];
                    if theta.abs() < 1e-300 {
                        // Deflated spectrum exhausted from this start vector.
                        stalled_rounds += 1;
                        if stalled_rounds > 4 {
                            return Err(Error::Numerical(
                                "deflated Lanczos found no further eigenpairs".into(),
                            ));
                        }
                        continue 'rounds;
                    }
                    let mu = sigma + 1.0 / theta;
                    let mut z = vec![0.0f64; n];
                    for (jcol, q) in basis.iter().take(steps).enumerate() {
                        axpy(&mut z, vecs[top][jcol], q);
                    }
                    let mnorm = dot(&z, minner.apply(&z)).sqrt();
                    for v in &mut z {
                        *v /= mnorm;
                    }
                    let kz = k.matvec_alloc(&z);
                    let mz = m.matvec_alloc(&z);
                    let res = kz
                        .iter()
                        .zip(&mz)
                        .map(|(a, b)| (a - mu * b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    best_residual = best_residual.min(res);
                    if res <= opts.residual_tol {
                        locked.push((mu, z, res));
                        locked_mz.push(mz);
                        stalled_rounds = 0;
                        continue 'rounds;
                    }
                    if breakdown {
                        stalled_rounds += 1;
                        if stalled_rounds > 4 {
                            return Err(Error::Numerical(format!(
                                "Lanczos stalled at residual {res:.3e} (tolerance {:.1e})",
                                opts.residual_tol
                            )));
                        }
                        continue 'rounds;
                    }
                    gate = (gate * 1e-2).max(1e-16);
                }
            }
        }
    }

    let mut solutions = locked;
    solutions.sort_by(|a, b| a.0.total_cmp(&b.0));
    let out = solutions
        .into_iter()
        .enumerate()
        .map(|(rank, (mu, z, residual))| {
            let mut field = op.inflate(&z);
            normalize_field(&mut field);
            let signature = mode_signature(&field);
            EigenSolution {
                mu,
                field,
                residual,
                position_index: rank,
                signature,
                resonance_warning: None,
            }
        })
        .collect();
    Ok(out)
}

/// Scale so the largest nodal magnitude is one and the value at `(N/4, 1/4)`
/// is nonnegative.
fn normalize_field(field: &mut NodalField) {
    let max_abs = field.max_abs();
    if max_abs == 0.0 {
        return;
    }
    let n = field.mesh.n;
    let probe = interpolate_field(field, [0.25 * n, 0.25]).unwrap_or(0.0);
    let sign = if probe < 0.0 {
        -1.0
    } else if probe > 0.0 {
        1.0
    } else {
        // Fall back to the first extremal node.
        let idx = field
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        field.values[idx].signum()
    };
    let scale = sign / max_abs;
    for v in &mut field.values {
        *v *= scale;
    }
}

/// CSV dump of a computed spectrum window: eigenvalues, residuals, signatures.
pub fn write_spectrum_csv<W: std::io::Write>(
    solutions: &[EigenSolution],
    mut w: W,
) -> Result<()> {
    writeln!(
        w,
        "position,mu,residual,dominant_k,sign_changes_x,sign_changes_y"
    )?;
    for s in solutions {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.position_index,
            s.mu,
            s.residual,
            s.signature.dominant_k,
            s.signature.sign_changes_x,
            s.signature.sign_changes_y
        )?;
    }
    Ok(())
}

/// Pick the candidate whose signature matches the (2,2) rectangle mode; among
/// matches, the eigenvalue nearest the target shift wins.
pub fn select_mode(candidates: Vec<EigenSolution>, spec: &DomainSpec) -> Result<EigenSolution> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no eigenpair candidates".into()));
    }
    let sigma = target_shift(spec.n);
    let diagnosis = resonance_report(spec.n, 12);
    let mut best: Option<EigenSolution> = None;
    for cand in candidates {
        if !cand.signature.matches_two_two() {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => (cand.mu - sigma).abs() < (b.mu - sigma).abs(),
        };
        if better {
            best = Some(cand);
        }
    }
    let mut chosen = best.ok_or_else(|| Error::ModeSelection {
        detail: "no candidate carries the (2,2) signature".into(),
        diagnosis: diagnosis.clone(),
    })?;
    if diagnosis.res_value < RESONANCE_GUARD {
        chosen.resonance_warning = Some(diagnosis);
    }
    Ok(chosen)
}
