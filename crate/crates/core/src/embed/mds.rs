use super::eigen::{leading_eigenpairs, JacobiConfig, DENSE_LIMIT};
use super::{Diagnostics, EmbedMethod, Embedding2D};
use crate::error::{Error, Result};
use crate::similarity::DistanceMatrix;

/// Eigenvalues below this fraction of the leading one collapse their axis.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Double-centered Gram matrix `B = -1/2 J D∘D J` with `J = I - 11ᵀ/n`,
/// row-major.
pub fn double_center(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.n_points();
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let sq = d.get(i, j).powi(2);
            b[i * n + j] = sq;
            b[j * n + i] = sq;
        }
    }
    let row_means: Vec<f64> = b
        .chunks_exact(n)
        .map(|r| r.iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -0.5 * (b[i * n + j] - row_means[i] - row_means[j] + grand);
        }
    }
    b
}

/// Classical (Torgerson) MDS into the plane.
///
/// Coordinates are the two leading eigenvectors of the double-centered
/// squared distances, scaled by the square roots of their (non-negative
/// part of the) eigenvalues. Each eigenvector is flipped so that its
/// largest-magnitude entry is positive, earliest index winning ties.
pub fn mds_embed(d: &DistanceMatrix) -> Result<Embedding2D> {
    mds_embed_with(d, &JacobiConfig::default())
}

pub fn mds_embed_with(d: &DistanceMatrix, jacobi: &JacobiConfig) -> Result<Embedding2D> {
    let n = d.n_points();
    if n < 3 {
        return Err(Error::size(format!("MDS needs at least 3 points, got {n}")));
    }
    let b = double_center(d);
    let eig = leading_eigenpairs(&b, n, 2, jacobi)?;

    let mut axes = [eig.vector(0), eig.vector(1)];
    for axis in &mut axes {
        let mut pivot = 0;
        for (i, v) in axis.iter().enumerate() {
            if v.abs() > axis[pivot].abs() {
                pivot = i;
            }
        }
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
    }
    // Eigenvalues at rounding level are zero; their square roots would not be.
    let floor = EIGEN_FLOOR * eig.values[0].abs();
    let scale = |l: f64| if l > floor { l.sqrt() } else { 0.0 };
    let sx = scale(eig.values[0]);
    let sy = scale(eig.values[1]);
    let points = (0..n).map(|i| [axes[0][i] * sx, axes[1][i] * sy]).collect();
    Ok(Embedding2D {
        points,
        method: EmbedMethod::Mds,
        diagnostics: Diagnostics::Mds {
            eigenvalues: [eig.values[0], eig.values[1]],
            solver: if n <= DENSE_LIMIT {
                "jacobi".into()
            } else {
                "subspace".into()
            },
            iterations: eig.iterations,
            residual: eig.residual,
        },
    })
}
