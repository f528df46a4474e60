//! Dense symmetric eigensolvers for the small problems in this crate: the
//! Lanczos tridiagonal (implicit-shift QL, EISPACK tql2 lineage) and fixed-size
//! matrices (cyclic Jacobi).

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric tridiagonal matrix with diagonal `diag`
/// and subdiagonal `off`. Returns eigenvalues ascending and, per eigenvalue,
/// its eigenvector; `vectors[j][r]` is component `r` of eigenvector `j`.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(off);
    // z[k*n + j]: component k of eigenvector j.
    let mut z = vec![0.0f64; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let eps = f64::EPSILON;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return Err(Error::Numerical(
                    "tridiagonal QL did not converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|k| z[k * n + j]).collect())
        .collect();
    Ok((values, vectors))
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns
/// eigenvalues ascending with matching eigenvectors (`vectors[j]` is the
/// eigenvector of `values[j]`).
pub fn jacobi_eigen<const N: usize>(mut a: [[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut v = [[0.0f64; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..N {
            for q in p + 1..N {
                off += a[p][q] * a[p][q];
            }
        }
        let scale: f64 = (0..N).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..N {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let mut values = [0.0f64; N];
    let mut vectors = [[0.0f64; N]; N];
    for (slot, &j) in order.iter().enumerate() {
        values[slot] = a[j][j];
        for k in 0..N {
            vectors[slot][k] = v[k][j];
        }
    }
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn check_tridiag(diag: &[f64], off: &[f64]) {
        let n = diag.len();
        let (values, vectors) = tridiagonal_eigen(diag, off).unwrap();
        for j in 0..n {
            // T v = λ v componentwise.
            for r in 0..n {
                let mut tv = diag[r] * vectors[j][r];
                if r > 0 {
                    tv += off[r - 1] * vectors[j][r - 1];
                }
                if r + 1 < n {
                    tv += off[r] * vectors[j][r + 1];
                }
                assert!(
                    (tv - values[j] * vectors[j][r]).abs() < 1e-11 * (1.0 + values[j].abs()),
                    "residual at ({j}, {r})"
                );
            }
        }
        // Orthonormality.
        for i in 0..n {
            for j in i..n {
                let ip: f64 = (0..n).map(|k| vectors[i][k] * vectors[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_matches_known_stencil() {
        // tridiag(-1, 2, -1): eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 12;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let (values, _) = tridiagonal_eigen(&diag, &off).unwrap();
        for (k, v) in values.iter().enumerate() {
            let exact =
                2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert_relative_eq!(v, &exact, epsilon = 1e-12);
        }
        check_tridiag(&diag, &off);
    }

    #[test]
    fn tridiagonal_with_wide_eigenvalue_range() {
        // Shift-invert style spectra: a couple of large duplicated values over
        // a cluster of tiny ones. This shape defeated nalgebra's QR.
        let diag = vec![4.3, 4.3, 0.1, -0.08, 0.05, -0.03, 0.02, 0.01, -0.005, 0.002];
        let off = vec![1e-4, 2e-3, 3e-2, 1e-2, 5e-3, 2e-2, 1e-3, 4e-3, 2e-3];
        check_tridiag(&diag, &off);
    }

    #[test]
    fn tridiagonal_random_cross_check() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.gen_range(2..18);
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let off: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            check_tridiag(&diag, &off);
        }
    }

    #[test]
    fn jacobi_small_matrix() {
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 1.5]];
        let (values, vectors) = jacobi_eigen(a);
        for j in 0..3 {
            for r in 0..3 {
                let av: f64 = (0..3).map(|k| a[r][k] * vectors[j][k]).sum();
                assert!((av - values[j] * vectors[j][r]).abs() < 1e-12);
            }
        }
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = values.iter().sum();
        assert_relative_eq!(trace, 6.5, epsilon = 1e-12);
    }
}
