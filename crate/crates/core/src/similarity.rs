//! Pairwise distances between spectrum vectors.
//!
//! The distance is written through inner products,
//! `d(a, b) = sqrt(<a,a> + <b,b> - 2<a,b>)`, which is algebraically the
//! Euclidean distance. The radicand can dip slightly below zero through
//! cancellation, so it is clamped before the root. The full matrix is
//! symmetric with a zero diagonal; only the strict upper triangle is stored.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::preprocess::SpectrumVector;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Distance from precomputed inner products. Symmetric in its arguments.
#[inline]
pub(crate) fn distance_from_dots(aa: f64, bb: f64, ab: f64) -> f64 {
    ((aa + bb) - 2.0 * ab).max(0.0).sqrt()
}

/// Inner-product form of the Euclidean distance on raw slices.
pub fn distance_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::size(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(distance_from_dots(dot(a, a), dot(b, b), dot(a, b)))
}

pub fn distance(a: &SpectrumVector, b: &SpectrumVector) -> Result<f64> {
    distance_values(a.values(), b.values())
}

/// Condensed pairwise distance matrix: `d_ij` for `i < j` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n_points: usize,
    condensed: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_condensed(n_points: usize, condensed: Vec<f64>) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::size(format!(
                "distance matrix needs at least 2 points, got {n_points}"
            )));
        }
        let expected = n_points * (n_points - 1) / 2;
        if condensed.len() != expected {
            return Err(Error::size(format!(
                "condensed length {} does not match {expected} for {n_points} points",
                condensed.len()
            )));
        }
        if let Some(k) = condensed.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::format(format!(
                "condensed entry {k} is {}",
                condensed[k]
            )));
        }
        Ok(Self {
            n_points,
            condensed,
        })
    }

    /// Builds the matrix from a generator evaluated on every pair `i < j`.
    pub fn from_fn(n_points: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut condensed = Vec::with_capacity(n_points * n_points.saturating_sub(1) / 2);
        for i in 0..n_points {
            for j in i + 1..n_points {
                condensed.push(f(i, j));
            }
        }
        Self::from_condensed(n_points, condensed)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n_points);
        // Rows 0..i hold n-1, n-2, ..., n-i entries.
        i * (2 * self.n_points - i - 1) / 2 + (j - i - 1)
    }

    /// `d_ij`, with `d_ii = 0` and `d_ij = d_ji`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.condensed[self.index(i, j)],
            std::cmp::Ordering::Greater => self.condensed[self.index(j, i)],
        }
    }

    /// Dense row-major `n × n` copy.
    pub fn to_square(&self) -> Vec<f64> {
        let n = self.n_points;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = self.get(i, j);
                out[i * n + j] = d;
                out[j * n + i] = d;
            }
        }
        out
    }

    const MAGIC: &'static [u8; 8] = b"DMATv1\0\0";

    /// Binary layout: 8-byte magic, `n_points` as u64 LE, then the condensed
    /// entries as f64 LE.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(Self::MAGIC)?;
        out.write_all(&(self.n_points as u64).to_le_bytes())?;
        for d in &self.condensed {
            out.write_all(&d.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::format("not a condensed distance matrix file"));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        let len = n
            .checked_mul(n.saturating_sub(1))
            .map(|m| m / 2)
            .ok_or_else(|| Error::format("n_points overflows"))?;
        let mut condensed = Vec::with_capacity(len);
        for _ in 0..len {
            input.read_exact(&mut word)?;
            condensed.push(f64::from_le_bytes(word));
        }
        Self::from_condensed(n, condensed)
    }
}

/// Pairwise distances of `vectors`. Rows are computed in parallel.
pub fn distance_matrix(vectors: &[SpectrumVector]) -> Result<DistanceMatrix> {
    let rows: Vec<&[f64]> = vectors.iter().map(SpectrumVector::values).collect();
    distance_matrix_values(&rows)
}

pub fn distance_matrix_values(rows: &[&[f64]]) -> Result<DistanceMatrix> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::size(format!(
            "distance matrix needs at least 2 vectors, got {n}"
        )));
    }
    let dims = rows[0].len();
    if let Some(k) = rows.iter().position(|r| r.len() != dims) {
        return Err(Error::size(format!(
            "vector {k} has dimension {}, expected {dims}",
            rows[k].len()
        )));
    }
    let norms: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
    let condensed: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let norms = &norms;
            (i + 1..n).map(move |j| distance_from_dots(norms[i], norms[j], dot(rows[i], rows[j])))
        })
        .collect();
    DistanceMatrix::from_condensed(n, condensed)
}
