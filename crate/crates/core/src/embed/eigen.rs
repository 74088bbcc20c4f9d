//! Symmetric eigensolvers for the MDS Gram matrix.
//!
//! Cyclic Jacobi handles the dense case. Beyond a few hundred points a full
//! Jacobi decomposition costs minutes, and MDS only needs the two leading
//! eigenpairs, so [`leading_eigenpairs`] switches to block subspace iteration
//! with a Jacobi Rayleigh-Ritz step on the small projected matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix. `vectors` is row-major
/// `n × k` with eigenvector `c` in column `c`. Pairs are sorted by
/// descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    /// Jacobi sweeps or subspace iterations performed.
    pub iterations: usize,
    /// Relative off-diagonal norm (Jacobi) or relative residual (subspace).
    pub residual: f64,
}

impl SymmetricEigen {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, c: usize) -> Vec<f64> {
        let k = self.k();
        (0..self.n).map(|i| self.vectors[i * k + c]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JacobiConfig {
    pub max_sweeps: usize,
    /// Convergence when the off-diagonal Frobenius norm falls below
    /// `tolerance` times the Frobenius norm of the input.
    pub tolerance: f64,
}

impl Default for JacobiConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            tolerance: 1e-12,
        }
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += 2.0 * a[i * n + j] * a[i * n + j];
        }
    }
    s.sqrt()
}

/// Full decomposition of the row-major symmetric `n × n` matrix `a` by
/// cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &[f64], n: usize, config: &JacobiConfig) -> Result<SymmetricEigen> {
    if a.len() != n * n {
        return Err(Error::size(format!(
            "expected {} entries for a {n}×{n} matrix, got {}",
            n * n,
            a.len()
        )));
    }
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = config.tolerance * scale;

    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a, n);
    while off > target {
        if sweeps == config.max_sweeps {
            return Err(Error::Numeric {
                message: format!("Jacobi did not converge in {sweeps} sweeps"),
                residual: off / scale,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Rotation is negligible next to both diagonal entries.
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        off = off_diagonal_norm(&a, n);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (c, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + c] = v[r * n + src];
        }
    }
    let residual = if scale > 0.0 { off / scale } else { 0.0 };
    Ok(SymmetricEigen {
        n,
        values,
        vectors,
        iterations: sweeps,
        residual,
    })
}

/// Matrices up to this size are decomposed densely by Jacobi.
pub const DENSE_LIMIT: usize = 320;

#[derive(Debug, Clone, Copy)]
pub struct SubspaceConfig {
    pub block: usize,
    pub max_iterations: usize,
    /// Converged when `‖A v - λ v‖ <= tolerance * |λ_max|` for every wanted pair.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self {
            block: 8,
            max_iterations: 20_000,
            tolerance: 1e-10,
            seed: 0x5eed,
        }
    }
}

/// The `k` algebraically largest eigenpairs of a symmetric matrix.
///
/// Dense Jacobi up to [`DENSE_LIMIT`], subspace iteration above. The
/// subspace route assumes the wanted eigenvalues also dominate in magnitude,
/// which holds for Gram matrices of Euclidean configurations.
pub fn leading_eigenpairs(
    a: &[f64],
    n: usize,
    k: usize,
    jacobi: &JacobiConfig,
) -> Result<SymmetricEigen> {
    if n <= DENSE_LIMIT {
        let full = jacobi_eigen(a, n, jacobi)?;
        return Ok(truncate(full, k));
    }
    subspace_eigen(a, n, k, &SubspaceConfig::default(), jacobi)
}

fn truncate(full: SymmetricEigen, k: usize) -> SymmetricEigen {
    let n = full.n;
    let k = k.min(n);
    let mut vectors = vec![0.0; n * k];
    for r in 0..n {
        vectors[r * k..(r + 1) * k].copy_from_slice(&full.vectors[r * n..r * n + k]);
    }
    SymmetricEigen {
        n,
        values: full.values[..k].to_vec(),
        vectors,
        ..full
    }
}

/// Orthonormalizes the columns of the row-major `n × b` block in place
/// (two passes of modified Gram-Schmidt). Collapsed columns are replaced by
/// fresh random directions.
fn orthonormalize(q: &mut [f64], n: usize, b: usize, rng: &mut ChaCha8Rng) {
    for c in 0..b {
        for _pass in 0..2 {
            for prev in 0..c {
                let proj: f64 = (0..n).map(|r| q[r * b + c] * q[r * b + prev]).sum();
                for r in 0..n {
                    q[r * b + c] -= proj * q[r * b + prev];
                }
            }
        }
        let norm = (0..n).map(|r| q[r * b + c].powi(2)).sum::<f64>().sqrt();
        if norm > 1e-300 {
            for r in 0..n {
                q[r * b + c] /= norm;
            }
        } else {
            for r in 0..n {
                q[r * b + c] = rng.gen_range(-1.0..1.0);
            }
            orthonormalize_column(q, n, b, c);
        }
    }
}

fn orthonormalize_column(q: &mut [f64], n: usize, b: usize, c: usize) {
    for prev in 0..c {
        let proj: f64 = (0..n).map(|r| q[r * b + c] * q[r * b + prev]).sum();
        for r in 0..n {
            q[r * b + c] -= proj * q[r * b + prev];
        }
    }
    let norm = (0..n).map(|r| q[r * b + c].powi(2)).sum::<f64>().sqrt();
    for r in 0..n {
        q[r * b + c] /= norm;
    }
}

/// `a (n×n) · q (n×b)`, both row-major.
fn mul_block(a: &[f64], q: &[f64], n: usize, b: usize) -> Vec<f64> {
    use rayon::prelude::*;
    let mut z = vec![0.0; n * b];
    z.par_chunks_mut(b).enumerate().for_each(|(i, row)| {
        let ai = &a[i * n..(i + 1) * n];
        for (j, &aij) in ai.iter().enumerate() {
            if aij != 0.0 {
                let qj = &q[j * b..(j + 1) * b];
                for c in 0..b {
                    row[c] += aij * qj[c];
                }
            }
        }
    });
    z
}

pub fn subspace_eigen(
    a: &[f64],
    n: usize,
    k: usize,
    config: &SubspaceConfig,
    jacobi: &JacobiConfig,
) -> Result<SymmetricEigen> {
    if a.len() != n * n {
        return Err(Error::size(format!(
            "expected {} entries for a {n}×{n} matrix, got {}",
            n * n,
            a.len()
        )));
    }
    let b = config.block.max(k + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut q: Vec<f64> = (0..n * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
    orthonormalize(&mut q, n, b, &mut rng);

    let mut residual = f64::INFINITY;
    for iter in 1..=config.max_iterations {
        let z = mul_block(a, &q, n, b);
        // Rayleigh-Ritz on H = Qᵀ A Q.
        let mut h = vec![0.0; b * b];
        for r in 0..b {
            for c in r..b {
                let s: f64 = (0..n).map(|i| q[i * b + r] * z[i * b + c]).sum();
                h[r * b + c] = s;
                h[c * b + r] = s;
            }
        }
        let small = jacobi_eigen(&h, b, jacobi)?;
        // Ritz vectors X = Q U and A X = Z U.
        let mut x = vec![0.0; n * b];
        let mut ax = vec![0.0; n * b];
        for i in 0..n {
            for c in 0..b {
                let mut sx = 0.0;
                let mut sz = 0.0;
                for m in 0..b {
                    let u = small.vectors[m * b + c];
                    sx += q[i * b + m] * u;
                    sz += z[i * b + m] * u;
                }
                x[i * b + c] = sx;
                ax[i * b + c] = sz;
            }
        }
        let lam_max = small.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        residual = 0.0;
        for c in 0..k {
            let r: f64 = (0..n)
                .map(|i| (ax[i * b + c] - small.values[c] * x[i * b + c]).powi(2))
                .sum::<f64>()
                .sqrt();
            residual = residual.max(if lam_max > 0.0 { r / lam_max } else { r });
        }
        if residual <= config.tolerance || lam_max == 0.0 {
            let mut vectors = vec![0.0; n * k];
            for i in 0..n {
                vectors[i * k..(i + 1) * k].copy_from_slice(&x[i * b..i * b + k]);
            }
            return Ok(SymmetricEigen {
                n,
                values: small.values[..k].to_vec(),
                vectors,
                iterations: iter,
                residual,
            });
        }
        q = ax;
        orthonormalize(&mut q, n, b, &mut rng);
    }
    Err(Error::Numeric {
        message: format!(
            "subspace iteration did not converge in {} iterations",
            config.max_iterations
        ),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    fn check_pairs(a: &[f64], e: &SymmetricEigen, tol: f64) {
        let n = e.n;
        for c in 0..e.k() {
            let v = e.vector(c);
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-10);
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i * n + j] * v[j]).sum();
                assert!((av - e.values[c] * v[i]).abs() < tol, "pair {c} row {i}");
            }
        }
    }

    #[test]
    fn two_by_two() {
        let e = jacobi_eigen(&[2.0, 1.0, 1.0, 2.0], 2, &JacobiConfig::default()).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_and_zero() {
        let e = jacobi_eigen(&[1.0, 0.0, 0.0, 5.0], 2, &JacobiConfig::default()).unwrap();
        assert_eq!(e.values, vec![5.0, 1.0]);
        assert_eq!(e.iterations, 0);
        let z = jacobi_eigen(&[0.0; 9], 3, &JacobiConfig::default()).unwrap();
        assert_eq!(z.values, vec![0.0; 3]);
    }

    #[test]
    fn random_matrix_decomposes() {
        let a = random_symmetric(40, 1);
        let e = jacobi_eigen(&a, 40, &JacobiConfig::default()).unwrap();
        check_pairs(&a, &e, 1e-11);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = (0..40).map(|i| a[i * 40 + i]).sum();
        assert!((trace - e.values.iter().sum::<f64>()).abs() < 1e-11);
    }

    #[test]
    fn sweep_cap_reports_residual() {
        let a = random_symmetric(10, 2);
        let cfg = JacobiConfig {
            max_sweeps: 1,
            tolerance: 1e-14,
        };
        match jacobi_eigen(&a, 10, &cfg) {
            Err(Error::Numeric { residual, .. }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn subspace_agrees_with_jacobi() {
        // Gram matrix of random points in 6 dimensions: PSD, rank 6.
        let n = 60;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 6]> = (0..n)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
            .collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..6).map(|d| pts[i][d] * pts[j][d]).sum();
            }
        }
        let dense = jacobi_eigen(&a, n, &JacobiConfig::default()).unwrap();
        let sub = subspace_eigen(
            &a,
            n,
            2,
            &SubspaceConfig::default(),
            &JacobiConfig::default(),
        )
        .unwrap();
        for c in 0..2 {
            assert!((dense.values[c] - sub.values[c]).abs() < 1e-9 * dense.values[0]);
            let dot: f64 = dense
                .vector(c)
                .iter()
                .zip(sub.vector(c))
                .map(|(x, y)| x * y)
                .sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8);
        }
        check_pairs(&a, &sub, 1e-8);
    }
}
