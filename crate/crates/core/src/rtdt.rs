//! Real-time data tracking against a reference map.
//!
//! The reference map embeds the early "normal" spectra together with the
//! zero-data vector `O`. The map is translated so that `O` sits at the
//! origin and rotated so that the centroid `g` of the normal data lies on the
//! positive horizontal axis.
//!
//! A new spectrum `X` is placed without re-embedding: with `Z` its nearest
//! reference vector and `Y` the reference vector at the smallest angle, the
//! image `x` lies on the circle of radius `‖X‖` about `O` and on the circle
//! of radius `‖X - Z‖` about `z`. Of the two intersections the one whose
//! angle to `y` (seen from `O`) best matches the angle between `X` and `Y` is
//! kept; when `y` is on the `O`-`z` line the candidate that best fits all
//! reference distances wins. If the circles miss each other, `x` is the
//! point on the `O`-`z` line minimizing the sum of squared radius residuals.
//!
//! The warning factor is `ρ = ‖gx‖ / ‖gp‖`, where `p` is the reference point
//! maximizing `<gp, gx>`. Every `M` values of `ρ` are averaged (disjoint
//! blocks) and an alert is raised, once, when the average reaches the
//! threshold.

use std::io::Write;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::embed::{mds_embed, tsne_embed, EmbedMethod, TsneConfig};
use crate::error::{Error, Result};
use crate::preprocess::{SpectrumVector, CSV_TIME_FORMAT};
use crate::similarity::{distance_from_dots, distance_matrix, dot};

/// Averaging window `M` used on the IMS campaigns (3 h of 10-minute records).
pub const DEFAULT_WINDOW: usize = 12;
/// Alert threshold on the averaged warning factor.
pub const DEFAULT_THRESHOLD: f64 = 2.0;

/// Relative slack under which two circles are treated as tangent.
const TANGENCY_SLACK: f64 = 1e-9;
/// Angle gaps (radians) closer than this do not separate the two candidates.
const ANGLE_TIE: f64 = 1e-9;

type Point = [f64; 2];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm2(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn dot2(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let s = points
        .iter()
        .fold([0.0; 2], |m, p| [m[0] + p[0], m[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

/// Which embedding builds the reference map.
#[derive(Debug, Clone, PartialEq)]
pub enum MapEngine {
    Mds,
    Tsne(TsneConfig),
}

#[derive(Debug, Clone)]
pub struct ReferenceMap {
    ref_vectors: Vec<SpectrumVector>,
    ref_sq_norms: Vec<f64>,
    /// Reference images followed by the image of `O`.
    coords2d: Vec<Point>,
    o2d: Point,
    g2d: Point,
    g_hi: Vec<f64>,
    rotation_applied: f64,
    method: EmbedMethod,
}

/// Builds a reference map with classical MDS.
pub fn build_reference_map(reference: &[SpectrumVector]) -> Result<ReferenceMap> {
    build_reference_map_with(reference, &MapEngine::Mds)
}

pub fn build_reference_map_with(
    reference: &[SpectrumVector],
    engine: &MapEngine,
) -> Result<ReferenceMap> {
    let n = reference.len();
    if n < 3 {
        return Err(Error::size(format!(
            "reference map needs at least 3 vectors, got {n}"
        )));
    }
    let dims = reference[0].dims();
    if let Some(k) = reference.iter().position(|v| v.dims() != dims) {
        return Err(Error::size(format!(
            "reference vector {k} has dimension {}, expected {dims}",
            reference[k].dims()
        )));
    }
    if let Some(k) = reference
        .windows(2)
        .position(|w| w[1].timestamp() <= w[0].timestamp())
    {
        return Err(Error::Sequencing {
            index: k + 1,
            message: "reference timestamps must be strictly increasing".into(),
        });
    }

    let zero = SpectrumVector::zero(
        dims,
        reference[0].bin_width(),
        reference[0].timestamp(),
        "zero-data",
    );
    let mut all = reference.to_vec();
    all.push(zero);
    let d = distance_matrix(&all)?;
    let embedding = match engine {
        MapEngine::Mds => mds_embed(&d)?,
        MapEngine::Tsne(cfg) => tsne_embed(&d, cfg)?,
    };

    let raw = embedding.points;
    let o_raw = raw[n];
    let to_g = sub(centroid(&raw[..n]), o_raw);
    let angle = if norm2(to_g) > 0.0 {
        to_g[1].atan2(to_g[0])
    } else {
        0.0
    };
    let (s, c) = (-angle).sin_cos();
    let coords2d: Vec<Point> = raw
        .iter()
        .map(|&p| {
            let q = sub(p, o_raw);
            [c * q[0] - s * q[1], s * q[0] + c * q[1]]
        })
        .collect();
    let g2d = centroid(&coords2d[..n]);

    let mut g_hi = vec![0.0; dims];
    for v in reference {
        for (g, x) in g_hi.iter_mut().zip(v.values()) {
            *g += x;
        }
    }
    g_hi.iter_mut().for_each(|g| *g /= n as f64);

    Ok(ReferenceMap {
        ref_sq_norms: reference
            .iter()
            .map(|v| dot(v.values(), v.values()))
            .collect(),
        ref_vectors: reference.to_vec(),
        o2d: coords2d[n],
        coords2d,
        g2d,
        g_hi,
        rotation_applied: -angle,
        method: embedding.method,
    })
}

impl ReferenceMap {
    pub fn ref_vectors(&self) -> &[SpectrumVector] {
        &self.ref_vectors
    }

    /// Images of the reference vectors followed by the image of `O`.
    pub fn coords2d(&self) -> &[Point] {
        &self.coords2d
    }

    /// Images of the reference vectors only.
    pub fn reference_points(&self) -> &[Point] {
        &self.coords2d[..self.ref_vectors.len()]
    }

    pub fn o2d(&self) -> Point {
        self.o2d
    }

    pub fn g2d(&self) -> Point {
        self.g2d
    }

    /// Centroid of the reference spectra.
    pub fn g_hi(&self) -> &[f64] {
        &self.g_hi
    }

    /// Rotation (radians) applied to the raw embedding about `O`.
    pub fn rotation_applied(&self) -> f64 {
        self.rotation_applied
    }

    pub fn method(&self) -> EmbedMethod {
        self.method
    }

    pub fn dims(&self) -> usize {
        self.g_hi.len()
    }

    pub fn last_timestamp(&self) -> NaiveDateTime {
        self.ref_vectors
            .last()
            .expect("non-empty reference")
            .timestamp()
    }

    /// CSV with columns `index,timestamp,x,y,kind`; `O` is the last row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "timestamp", "x", "y", "kind"])?;
        for (i, p) in self.coords2d.iter().enumerate() {
            let (ts, kind) = match self.ref_vectors.get(i) {
                Some(v) => (
                    v.timestamp().format(CSV_TIME_FORMAT).to_string(),
                    "reference",
                ),
                None => (String::new(), "zero"),
            };
            w.write_record([
                i.to_string(),
                ts,
                p[0].to_string(),
                p[1].to_string(),
                kind.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Where a new spectrum lands on the map and why.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub x2d: Point,
    /// Whether the two circles intersected.
    pub feasible: bool,
    /// Index of the nearest reference vector `Z`.
    pub nearest: usize,
    /// Index of the best-aligned reference vector `Y`, if any has non-zero norm.
    pub aligned: Option<usize>,
}

/// Places a spectrum on the map geometrically.
pub fn place(map: &ReferenceMap, x: &SpectrumVector) -> Result<Placement> {
    if x.dims() != map.dims() {
        return Err(Error::size(format!(
            "vector has dimension {}, map uses {}",
            x.dims(),
            map.dims()
        )));
    }
    let xv = x.values();
    let xx = dot(xv, xv);

    let cross: Vec<f64> = map
        .ref_vectors
        .iter()
        .map(|r| dot(xv, r.values()))
        .collect();
    let hd_dist: Vec<f64> = cross
        .iter()
        .zip(&map.ref_sq_norms)
        .map(|(&xr, &rr)| distance_from_dots(xx, rr, xr))
        .collect();
    let mut nearest = 0;
    let mut r_z = f64::INFINITY;
    for (k, &d) in hd_dist.iter().enumerate() {
        if d < r_z {
            r_z = d;
            nearest = k;
        }
    }
    let z2d = map.coords2d[nearest];
    let o = map.o2d;
    if r_z == 0.0 {
        return Ok(Placement {
            x2d: z2d,
            feasible: true,
            nearest,
            aligned: None,
        });
    }
    let r_o = xx.sqrt();
    if r_o == 0.0 {
        return Ok(Placement {
            x2d: o,
            feasible: true,
            nearest,
            aligned: None,
        });
    }

    let mut aligned = None;
    let mut best_cos = f64::NEG_INFINITY;
    for (k, (&xr, &rr)) in cross.iter().zip(&map.ref_sq_norms).enumerate() {
        if rr == 0.0 {
            continue;
        }
        let cos = xr / (r_o * rr.sqrt());
        if cos > best_cos {
            best_cos = cos;
            aligned = Some(k);
        }
    }
    let target_angle = best_cos.clamp(-1.0, 1.0).acos();
    let y_dir = aligned
        .map(|k| sub(map.coords2d[k], o))
        .filter(|v| norm2(*v) > 0.0);

    let dz = sub(z2d, o);
    let d = norm2(dz);
    if d == 0.0 {
        if (r_o - r_z).abs() > TANGENCY_SLACK * r_o.max(r_z) {
            return Err(Error::DegenerateMap(format!(
                "nearest reference sits on the zero-data point but the radii differ ({r_o} vs {r_z})"
            )));
        }
        let dir = match y_dir {
            Some(v) => {
                let u = [v[0] / norm2(v), v[1] / norm2(v)];
                let (s, c) = target_angle.sin_cos();
                [c * u[0] - s * u[1], s * u[0] + c * u[1]]
            }
            None => [1.0, 0.0],
        };
        let x2d = [o[0] + r_o * dir[0], o[1] + r_o * dir[1]];
        return Ok(Placement {
            x2d,
            feasible: true,
            nearest,
            aligned,
        });
    }

    let u = [dz[0] / d, dz[1] / d];
    let along = |t: f64| [o[0] + t * u[0], o[1] + t * u[1]];
    let slack = TANGENCY_SLACK * (r_o + r_z + d);
    if d > r_o + r_z + slack {
        let x2d = along(0.5 * (r_o + d - r_z));
        return Ok(Placement {
            x2d,
            feasible: false,
            nearest,
            aligned,
        });
    }
    if d < (r_o - r_z).abs() - slack {
        let x2d = if r_o > r_z {
            along(0.5 * (r_o + d + r_z))
        } else {
            along(-0.5 * (r_o + r_z - d))
        };
        return Ok(Placement {
            x2d,
            feasible: false,
            nearest,
            aligned,
        });
    }

    let a = (r_o * r_o - r_z * r_z + d * d) / (2.0 * d);
    let h = (r_o * r_o - a * a).max(0.0).sqrt();
    let foot = along(a);
    let perp = [-u[1], u[0]];
    let candidates = [
        [foot[0] + h * perp[0], foot[1] + h * perp[1]],
        [foot[0] - h * perp[0], foot[1] - h * perp[1]],
    ];
    let gaps = match y_dir {
        Some(v) => candidates.map(|c| {
            let w = sub(c, o);
            let ang = (v[0] * w[1] - v[1] * w[0]).abs().atan2(dot2(v, w));
            (ang - target_angle).abs()
        }),
        None => [0.0; 2],
    };
    let pick = if (gaps[0] - gaps[1]).abs() > ANGLE_TIE {
        usize::from(gaps[1] < gaps[0])
    } else {
        // y lies on the o-z line, so the angle cannot tell the mirror images
        // apart. Fall back to agreement with every reference distance.
        let misfit = candidates.map(|c| {
            map.reference_points()
                .iter()
                .zip(&hd_dist)
                .map(|(&q, &dk)| (norm2(sub(c, q)) - dk).powi(2))
                .sum::<f64>()
        });
        usize::from(misfit[1] < misfit[0])
    };
    Ok(Placement {
        x2d: candidates[pick],
        feasible: true,
        nearest,
        aligned,
    })
}

/// Warning factor of a planar point against a set of reference images.
///
/// `p` maximizes `<p - g, x - g>`; ties go to the larger `‖p - g‖`, then to
/// the earlier index. Returns 0 when `x == g`.
pub fn warning_factor_planar(reference: &[Point], g: Point, x: Point) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::DegenerateMap("no reference points".into()));
    }
    let gx = sub(x, g);
    if gx == [0.0, 0.0] {
        return Ok(0.0);
    }
    let mut best: Option<(f64, f64)> = None;
    for &p in reference {
        let gp = sub(p, g);
        let key = (dot2(gp, gx), norm2(gp));
        let better = match best {
            None => true,
            Some((proj, len)) => key.0 > proj || (key.0 == proj && key.1 > len),
        };
        if better {
            best = Some(key);
        }
    }
    let (_, denom) = best.expect("non-empty reference");
    if denom == 0.0 {
        return Err(Error::DegenerateMap(
            "every reference point coincides with the centroid".into(),
        ));
    }
    Ok(norm2(gx) / denom)
}

pub fn warning_factor(map: &ReferenceMap, x2d: Point) -> Result<f64> {
    warning_factor_planar(map.reference_points(), map.g2d, x2d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedPoint {
    pub timestamp: NaiveDateTime,
    pub x2d: Point,
    pub rho: f64,
    pub feasible_geometry: bool,
}

/// Places `x` and evaluates its warning factor.
pub fn plot_point(map: &ReferenceMap, x: &SpectrumVector) -> Result<TrackedPoint> {
    let placement = place(map, x)?;
    Ok(TrackedPoint {
        timestamp: x.timestamp(),
        x2d: placement.x2d,
        rho: warning_factor(map, placement.x2d)?,
        feasible_geometry: placement.feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlertConfig {
    /// `M`: number of ρ values per average.
    pub window: usize,
    pub threshold: f64,
}

impl Default for AlertConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoAverage {
    /// Timestamp of the last measurement in the block.
    pub timestamp: NaiveDateTime,
    pub rho_avg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub timestamp: NaiveDateTime,
    pub rho_avg: f64,
    /// Index of the triggering entry in the ρ_avg history.
    pub block: usize,
}

/// Rolling ρ window, averaged history and latched alerts.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertState {
    config: AlertConfig,
    rho_window: Vec<f64>,
    history: Vec<RhoAverage>,
    alerts: Vec<AlertEvent>,
    latched: bool,
}

impl AlertState {
    pub fn new(config: AlertConfig) -> Result<Self> {
        if config.window == 0 {
            return Err(Error::invalid("alert window must be at least 1"));
        }
        if !config.threshold.is_finite() {
            return Err(Error::invalid("alert threshold must be finite"));
        }
        Ok(Self {
            config,
            rho_window: Vec::with_capacity(config.window),
            history: Vec::new(),
            alerts: Vec::new(),
            latched: false,
        })
    }

    pub fn config(&self) -> AlertConfig {
        self.config
    }

    /// ρ values of the current, incomplete block.
    pub fn rho_window(&self) -> &[f64] {
        &self.rho_window
    }

    pub fn history(&self) -> &[RhoAverage] {
        &self.history
    }

    pub fn alerts(&self) -> &[AlertEvent] {
        &self.alerts
    }

    pub fn is_latched(&self) -> bool {
        self.latched
    }

    /// Re-arms the alarm. History and past alerts are kept.
    pub fn reset(&mut self) {
        self.latched = false;
    }

    /// Adds one ρ value. Completing a block of `M` values appends its mean to
    /// the history and may raise an alert.
    pub fn update(&mut self, rho: f64, timestamp: NaiveDateTime) -> Option<AlertEvent> {
        debug_assert!(rho >= 0.0);
        self.rho_window.push(rho);
        if self.rho_window.len() < self.config.window {
            return None;
        }
        let rho_avg = self.rho_window.iter().sum::<f64>() / self.rho_window.len() as f64;
        self.rho_window.clear();
        self.history.push(RhoAverage { timestamp, rho_avg });
        if rho_avg >= self.config.threshold && !self.latched {
            self.latched = true;
            let event = AlertEvent {
                timestamp,
                rho_avg,
                block: self.history.len() - 1,
            };
            self.alerts.push(event);
            return Some(event);
        }
        None
    }

    /// CSV with columns `timestamp,rho_avg`.
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "rho_avg"])?;
        for h in &self.history {
            w.write_record([
                h.timestamp.format(CSV_TIME_FORMAT).to_string(),
                h.rho_avg.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Incremental tracker for a live stream of spectra.
#[derive(Debug, Clone)]
pub struct Tracker<'a> {
    map: &'a ReferenceMap,
    state: AlertState,
    last: NaiveDateTime,
    seen: usize,
}

impl<'a> Tracker<'a> {
    pub fn new(map: &'a ReferenceMap, config: AlertConfig) -> Result<Self> {
        Ok(Self {
            map,
            state: AlertState::new(config)?,
            last: map.last_timestamp(),
            seen: 0,
        })
    }

    pub fn state(&self) -> &AlertState {
        &self.state
    }

    pub fn into_state(self) -> AlertState {
        self.state
    }

    pub fn push(&mut self, x: &SpectrumVector) -> Result<(TrackedPoint, Option<AlertEvent>)> {
        if x.timestamp() <= self.last {
            return Err(Error::Sequencing {
                index: self.seen,
                message: format!("timestamp {} is not after {}", x.timestamp(), self.last),
            });
        }
        let point = plot_point(self.map, x)?;
        self.last = x.timestamp();
        self.seen += 1;
        let event = self.state.update(point.rho, point.timestamp);
        Ok((point, event))
    }
}

/// Tracks a whole stream in order. Output is aligned with `stream`.
pub fn track_stream(
    map: &ReferenceMap,
    stream: &[SpectrumVector],
    config: AlertConfig,
) -> Result<(Vec<TrackedPoint>, AlertState)> {
    let mut tracker = Tracker::new(map, config)?;
    let mut points = Vec::with_capacity(stream.len());
    for x in stream {
        points.push(tracker.push(x)?.0);
    }
    Ok((points, tracker.into_state()))
}

/// CSV with columns `timestamp,x,y,rho,feasible_geometry`.
pub fn write_tracked_csv<W: Write>(out: W, points: &[TrackedPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "x", "y", "rho", "feasible_geometry"])?;
    for p in points {
        w.write_record([
            p.timestamp.format(CSV_TIME_FORMAT).to_string(),
            p.x2d[0].to_string(),
            p.x2d[1].to_string(),
            p.rho.to_string(),
            p.feasible_geometry.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
