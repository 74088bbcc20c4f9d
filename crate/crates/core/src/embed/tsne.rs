//! Exact (O(n²) per iteration) t-SNE on a precomputed distance matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Diagnostics, EmbedMethod, Embedding2D};
use crate::error::{Error, Result};
use crate::similarity::DistanceMatrix;

/// Floor applied to probabilities before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Allowed gap between the achieved and target entropy, in bits.
pub const ENTROPY_TOLERANCE: f64 = 1e-5;
const BANDWIDTH_STEPS: usize = 200;
const INIT_SCALE: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumSchedule {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_: f64,
    pub switch_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub momentum: MomentumSchedule,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration_factor: 12.0,
            early_exaggeration_iters: 250,
            momentum: MomentumSchedule {
                initial: 0.5,
                final_: 0.8,
                switch_iter: 250,
            },
            seed: 0,
        }
    }
}

impl TsneConfig {
    pub fn with_perplexity(perplexity: f64) -> Self {
        Self {
            perplexity,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.perplexity.is_finite() && self.perplexity > 0.0) {
            bad.push("perplexity must be positive".to_string());
        } else if self.perplexity >= (n_points as f64 - 1.0) / 3.0 {
            bad.push(format!(
                "perplexity {} must be below (n_points - 1) / 3 = {:.3}",
                self.perplexity,
                (n_points as f64 - 1.0) / 3.0
            ));
        }
        if self.iterations < self.early_exaggeration_iters {
            bad.push("iterations must cover early_exaggeration_iters".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            bad.push("learning_rate must be positive".into());
        }
        if !(self.early_exaggeration_factor.is_finite() && self.early_exaggeration_factor > 0.0) {
            bad.push("early_exaggeration_factor must be positive".into());
        }
        let m = &self.momentum;
        if ![m.initial, m.final_].iter().all(|v| (0.0..1.0).contains(v)) {
            bad.push("momentum values must lie in [0, 1)".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}

/// Joint affinity matrix: symmetric, zero diagonal, entries summing to one.
/// Dense row-major `n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities {
    n: usize,
    p: Vec<f64>,
}

impl Affinities {
    pub fn from_dense(n: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n * n {
            return Err(Error::size(format!(
                "expected {} affinities, got {}",
                n * n,
                p.len()
            )));
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::format("affinities must be finite and non-negative"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::format(format!(
                "affinities sum to {total}, expected 1"
            )));
        }
        for i in 0..n {
            if p[i * n + i] != 0.0 {
                return Err(Error::format("affinity diagonal must be zero"));
            }
            for j in i + 1..n {
                if (p[i * n + j] - p[j * n + i]).abs() > 1e-15 {
                    return Err(Error::format("affinities must be symmetric"));
                }
            }
        }
        Ok(Self { n, p })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

/// Shannon entropy in bits of the conditional distribution of row `row`
/// at precision `beta`, and the (normalized) distribution itself.
fn conditional_row(sq: &[f64], row: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = sq
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != row)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, &d) in sq.iter().enumerate() {
        if j == row {
            out[j] = 0.0;
            continue;
        }
        let shifted = d - min;
        let w = (-beta * shifted).exp();
        out[j] = w;
        sum += w;
        weighted += w * shifted;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    // H = ln(sum) + beta * E[shifted], converted to bits.
    (sum.ln() + beta * weighted / sum) / std::f64::consts::LN_2
}

/// Conditional distribution `p_{j|i}` whose entropy matches `log2(perplexity)`.
fn calibrate_row(sq: &[f64], row: usize, perplexity: f64) -> Result<Vec<f64>> {
    let target = perplexity.log2();
    let mut out = vec![0.0; sq.len()];
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut gap = f64::INFINITY;
    for _ in 0..BANDWIDTH_STEPS {
        let h = conditional_row(sq, row, beta, &mut out);
        gap = h - target;
        if gap.abs() <= ENTROPY_TOLERANCE {
            return Ok(out);
        }
        if gap > 0.0 {
            // Too flat: sharpen.
            lo = beta;
            beta = if hi.is_finite() {
                0.5 * (beta + hi)
            } else {
                beta * 2.0
            };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    Err(Error::Bandwidth {
        index: row,
        message: format!("entropy still {gap:+.3e} bits from target after {BANDWIDTH_STEPS} steps"),
    })
}

/// Perplexity-calibrated joint affinities `P_ij = (p_{j|i} + p_{i|j}) / 2n`.
pub fn joint_affinities(d: &DistanceMatrix, perplexity: f64) -> Result<Affinities> {
    let n = d.n_points();
    let square = d.to_square();
    let sq: Vec<f64> = square.iter().map(|v| v * v).collect();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| calibrate_row(&sq[i * n..(i + 1) * n], i, perplexity))
        .collect::<Result<Vec<_>>>()?;
    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in i + 1..n {
            let v = (rows[i][j] + rows[j][i]) * scale;
            p[i * n + j] = v;
            p[j * n + i] = v;
        }
    }
    // Renormalize away rounding in the row sums.
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(Affinities { n, p })
}

fn student_kernel(points: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = points.len();
    let mut num = vec![0.0; n * n];
    num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                *v = 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    });
    let z: f64 = num.chunks_exact(n).map(|r| r.iter().sum::<f64>()).sum();
    (num, z)
}

/// `KL(P ‖ Q)` with `Q` the normalized Student-t kernel of `points`.
/// Both distributions are floored at [`PROBABILITY_FLOOR`] inside the log.
pub fn kl_divergence(p: &Affinities, points: &[[f64; 2]]) -> Result<f64> {
    let n = p.n_points();
    if points.len() != n {
        return Err(Error::size(format!(
            "{} points for {n} affinities",
            points.len()
        )));
    }
    let (num, z) = student_kernel(points);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p.get(i, j);
            if pij > 0.0 {
                let qij = num[i * n + j] / z;
                kl += pij * (pij.max(PROBABILITY_FLOOR) / qij.max(PROBABILITY_FLOOR)).ln();
            }
        }
    }
    Ok(kl)
}

/// t-SNE embedding of a distance matrix into the plane.
///
/// Bandwidths come from a bisection on the conditional entropy, the layout
/// starts from a seeded isotropic Gaussian with standard deviation 1e-4 and is
/// optimized by gradient descent with early exaggeration, a two-stage
/// momentum schedule and per-coordinate adaptive gains.
pub fn tsne_embed(d: &DistanceMatrix, config: &TsneConfig) -> Result<Embedding2D> {
    let n = d.n_points();
    config.validate(n)?;
    let p = joint_affinities(d, config.perplexity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, INIT_SCALE).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_after_exaggeration = None;

    for iter in 0..config.iterations {
        if iter == config.early_exaggeration_iters {
            kl_after_exaggeration = Some(kl_divergence(&p, &y)?);
        }
        let exaggeration = if iter < config.early_exaggeration_iters {
            config.early_exaggeration_factor
        } else {
            1.0
        };
        let momentum = if iter < config.momentum.switch_iter {
            config.momentum.initial
        } else {
            config.momentum.final_
        };
        let (num, z) = student_kernel(&y);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = num[i * n + j];
                    let coeff = (exaggeration * p.get(i, j) - w / z) * w;
                    g[0] += coeff * (y[i][0] - y[j][0]);
                    g[1] += coeff * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for c in 0..2 {
                let gain = &mut gains[i][c];
                *gain = if (grad[i][c] > 0.0) != (update[i][c] > 0.0) {
                    *gain + 0.2
                } else {
                    (*gain * 0.8).max(MIN_GAIN)
                };
                update[i][c] = momentum * update[i][c] - config.learning_rate * *gain * grad[i][c];
                y[i][c] += update[i][c];
            }
        }
        let mean = y.iter().fold([0.0; 2], |m, p| [m[0] + p[0], m[1] + p[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        y.iter_mut().for_each(|p| {
            p[0] -= mean[0];
            p[1] -= mean[1];
        });
    }

    let kl_final = kl_divergence(&p, &y)?;
    if y.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::Numeric {
            message: "t-SNE layout diverged".into(),
            residual: kl_final,
        });
    }
    Ok(Embedding2D {
        points: y,
        method: EmbedMethod::Tsne,
        diagnostics: Diagnostics::Tsne {
            perplexity: config.perplexity,
            iterations: config.iterations,
            kl_after_exaggeration: kl_after_exaggeration.unwrap_or(kl_final),
            kl_final,
        },
    })
}
