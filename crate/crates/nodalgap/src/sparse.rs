//! Compressed-row symmetric matrices, reverse Cuthill-McKee ordering, and a
//! banded LDLᵀ factorization used for the shifted solves.
//!
//! The structured mesh keeps the operators banded once nodes are ordered along
//! the short grid direction; RCM recovers such an ordering from the sparsity
//! pattern alone, so the factorization does not depend on how the caller
//! numbered the unknowns.

use crate::error::{Error, Result};

/// Symmetric sparse matrix in CSR form. The full pattern is stored physically;
/// symmetry is a structural invariant checked by [`SparseSym::symmetry_defect`].
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseSym {
    /// Assemble from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &mut Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut val: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            col,
            val,
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col[lo..hi].binary_search(&(c as u32)) {
            Ok(k) => self.val[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k] as usize];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col[k] as usize;
                if c > r {
                    worst = worst.max((self.val[k] - self.get(c, r)).abs());
                }
            }
        }
        worst / scale
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// Entrywise `ca·A + cb·B`; patterns are merged.
    pub fn combine(a: &Self, ca: f64, b: &Self, cb: f64) -> Self {
        assert_eq!(a.dim, b.dim);
        let mut row_ptr = vec![0usize; a.dim + 1];
        let mut col = Vec::with_capacity(a.nnz().max(b.nnz()));
        let mut val = Vec::with_capacity(col.capacity());
        for r in 0..a.dim {
            let (mut i, mut j) = (a.row_ptr[r], b.row_ptr[r]);
            let (ie, je) = (a.row_ptr[r + 1], b.row_ptr[r + 1]);
            while i < ie || j < je {
                let ac = if i < ie { a.col[i] } else { u32::MAX };
                let bc = if j < je { b.col[j] } else { u32::MAX };
                if ac == bc {
                    col.push(ac);
                    val.push(ca * a.val[i] + cb * b.val[j]);
                    i += 1;
                    j += 1;
                } else if ac < bc {
                    col.push(ac);
                    val.push(ca * a.val[i]);
                    i += 1;
                } else {
                    col.push(bc);
                    val.push(cb * b.val[j]);
                    j += 1;
                }
            }
            row_ptr[r + 1] = col.len();
        }
        Self {
            dim: a.dim,
            row_ptr,
            col,
            val,
        }
    }
}

/// Reverse Cuthill-McKee ordering: returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSym) -> Vec<u32> {
    let n = a.dim;
    let degree = |v: usize| a.row_ptr[v + 1] - a.row_ptr[v];
    let mut visited = vec![false; n];
    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut queue: std::collections::VecDeque<u32> = std::collections::VecDeque::new();

    loop {
        // Next start: unvisited vertex of minimum degree (pseudo-peripheral enough
        // for grid graphs).
        let start = match (0..n).filter(|&v| !visited[v]).min_by_key(|&v| degree(v)) {
            Some(v) => v,
            None => break,
        };
        visited[start] = true;
        queue.push_back(start as u32);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<u32> = (a.row_ptr[v as usize]..a.row_ptr[v as usize + 1])
                .map(|k| a.col[k])
                .filter(|&c| !visited[c as usize] && c != v)
                .collect();
            nbrs.sort_unstable_by_key(|&c| degree(c as usize));
            for c in nbrs {
                if !visited[c as usize] {
                    visited[c as usize] = true;
                    queue.push_back(c);
                }
            }
        }
    }
    order.reverse();
    order
}

/// LDLᵀ factorization of a banded symmetric matrix, without pivoting. Fine for
/// shifted stiffness matrices whose shift is not numerically at an eigenvalue;
/// a vanishing pivot is reported so the caller can perturb the shift.
#[derive(Debug)]
pub struct BandedLdlt {
    pub dim: usize,
    pub bandwidth: usize,
    /// Column-major band of the unit lower factor: `band[j*(bw+1) + r]` holds
    /// `L[j+r][j]` for `r = 0..=bw`, with the diagonal slot storing `D[j]`.
    band: Vec<f64>,
    /// `perm[new] = old` ordering applied before factorization.
    perm: Vec<u32>,
    negative_pivots: usize,
}

impl BandedLdlt {
    /// Factor `a` under the given ordering (`perm[new] = old`).
    pub fn factor(a: &SparseSym, perm: Vec<u32>) -> Result<Self> {
        let n = a.dim;
        assert_eq!(perm.len(), n);
        let mut iperm = vec![0u32; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old as usize] = new as u32;
        }
        let mut bandwidth = 0usize;
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let pr = iperm[r] as i64;
                let pc = iperm[a.col[k] as usize] as i64;
                bandwidth = bandwidth.max((pr - pc).unsigned_abs() as usize);
            }
        }
        let stride = bandwidth + 1;
        let mut band = vec![0.0f64; n * stride];
        let mut max_diag = 0.0f64;
        for r in 0..n {
            let pr = iperm[r] as usize;
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let pc = iperm[a.col[k] as usize] as usize;
                if pr >= pc {
                    band[pc * stride + (pr - pc)] = a.val[k];
                }
                if pr == pc {
                    max_diag = max_diag.max(a.val[k].abs());
                }
            }
        }
        let pivot_floor = 1e-12 * max_diag.max(1e-300);

        let mut negative_pivots = 0usize;
        let mut w = vec![0.0f64; stride];
        for j in 0..n {
            let len = stride.min(n - j);
            w[..len].copy_from_slice(&band[j * stride..j * stride + len]);
            let lo = j.saturating_sub(bandwidth);
            for k in lo..j {
                let off = j - k;
                let ljk = band[k * stride + off];
                if ljk == 0.0 {
                    continue;
                }
                let c = ljk * band[k * stride];
                let reach = (stride - off).min(len);
                let src = &band[k * stride + off..k * stride + off + reach];
                let dst = &mut w[..reach];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= c * s;
                }
            }
            let d = w[0];
            if d.abs() <= pivot_floor {
                return Err(Error::Numerical(format!(
                    "pivot {d:.3e} at column {j}: shift numerically at an eigenvalue"
                )));
            }
            if d < 0.0 {
                negative_pivots += 1;
            }
            band[j * stride] = d;
            for r in 1..len {
                band[j * stride + r] = w[r] / d;
            }
            for r in len..stride {
                band[j * stride + r] = 0.0;
            }
        }
        Ok(Self {
            dim: n,
            bandwidth,
            band,
            perm,
            negative_pivots,
        })
    }

    /// Count of negative pivots = number of eigenvalues of the factored matrix
    /// below zero (Sylvester's law of inertia).
    pub fn negative_inertia(&self) -> usize {
        self.negative_pivots
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.dim;
        let stride = self.bandwidth + 1;
        let mut z = vec![0.0f64; n];
        for new in 0..n {
            z[new] = b[self.perm[new] as usize];
        }
        // Forward: L z' = z.
        for j in 0..n {
            let zj = z[j];
            if zj != 0.0 {
                let len = stride.min(n - j);
                let colv = &self.band[j * stride..j * stride + len];
                for r in 1..len {
                    z[j + r] -= colv[r] * zj;
                }
            }
        }
        // Diagonal.
        for j in 0..n {
            z[j] /= self.band[j * stride];
        }
        // Backward: Lᵀ x = z.
        for j in (0..n).rev() {
            let len = stride.min(n - j);
            let colv = &self.band[j * stride..j * stride + len];
            let mut acc = z[j];
            for r in 1..len {
                acc -= colv[r] * z[j + r];
            }
            z[j] = acc;
        }
        for new in 0..n {
            x[self.perm[new] as usize] = z[new];
        }
    }

    pub fn solve_alloc(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.solve(b, &mut x);
        x
    }
}
