//! Two-dimensional embeddings of a distance matrix.
//!
//! [`mds_embed`] (classical MDS) preserves global geometry and is the engine
//! behind reference maps. [`tsne_embed`] favours local neighbourhoods and is
//! offered for offline comparison maps.

pub mod eigen;
mod mds;
mod tsne;

use std::io::Write;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::CSV_TIME_FORMAT;
pub use mds::{double_center, mds_embed, mds_embed_with, EIGEN_FLOOR};
pub use tsne::{
    joint_affinities, kl_divergence, tsne_embed, Affinities, MomentumSchedule, TsneConfig,
    ENTROPY_TOLERANCE, PROBABILITY_FLOOR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedMethod {
    Mds,
    Tsne,
}

impl EmbedMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedMethod::Mds => "mds",
            EmbedMethod::Tsne => "tsne",
        }
    }
}

impl std::fmt::Display for EmbedMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EmbedMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mds" => Ok(EmbedMethod::Mds),
            "tsne" => Ok(EmbedMethod::Tsne),
            other => Err(Error::invalid(format!(
                "unknown embedding method {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Diagnostics {
    Mds {
        eigenvalues: [f64; 2],
        solver: String,
        iterations: usize,
        residual: f64,
    },
    Tsne {
        perplexity: f64,
        iterations: usize,
        kl_after_exaggeration: f64,
        kl_final: f64,
    },
}

/// Planar coordinates aligned index-for-index with the embedded vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    pub points: Vec<[f64; 2]>,
    pub method: EmbedMethod,
    pub diagnostics: Diagnostics,
}

impl Embedding2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.points[i], self.points[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Index of the closest other point (earliest index on ties).
    pub fn nearest_neighbour(&self, i: usize) -> usize {
        (0..self.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| self.distance(i, a).total_cmp(&self.distance(i, b)))
            .expect("embedding has more than one point")
    }

    /// CSV with columns `index,timestamp,x,y,method`.
    pub fn write_csv<W: Write>(&self, out: W, timestamps: &[NaiveDateTime]) -> Result<()> {
        if timestamps.len() != self.points.len() {
            return Err(Error::size(format!(
                "{} timestamps for {} embedded points",
                timestamps.len(),
                self.points.len()
            )));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "timestamp", "x", "y", "method"])?;
        for (i, (p, ts)) in self.points.iter().zip(timestamps).enumerate() {
            w.write_record([
                i.to_string(),
                ts.format(CSV_TIME_FORMAT).to_string(),
                p[0].to_string(),
                p[1].to_string(),
                self.method.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pretty-printed JSON of the diagnostics, newline-terminated.
    pub fn diagnostics_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.diagnostics)?;
        s.push('\n');
        Ok(s)
    }
}
