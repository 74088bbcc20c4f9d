//! Loading IMS-format vibration recordings and generating synthetic
//! run-to-failure campaigns.
//!
//! An IMS measurement file is plain ASCII: one row per sample instant, one
//! whitespace-separated column per channel. The file carries no header and no
//! time information; the measurement time is encoded only in the file name as
//! `yyyy.MM.dd.HH.mm.ss`.
//!
//! ```
//! use bearingmap::ingest::parse_ims_file;
//!
//! let channels = parse_ims_file(b"0.1\t-0.2\n0.3   0.4\n", Some(2)).unwrap();
//! assert_eq!(channels, vec![vec![0.1, 0.3], vec![-0.2, 0.4]]);
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Format of IMS file names.
pub const NAME_FORMAT: &str = "%Y.%m.%d.%H.%M.%S";

/// Name of the JSON manifest stored next to a written dataset.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Sampling rate of the IMS rig.
pub const IMS_SAMPLE_RATE: f64 = 20_000.0;

/// Samples per IMS measurement file.
pub const IMS_SEGMENT_LEN: usize = 20_480;

/// One timestamped multi-channel measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    timestamp: NaiveDateTime,
    sample_rate: f64,
    channels: Vec<Vec<f64>>,
    source_id: String,
}

impl RawRecording {
    pub fn new(
        timestamp: NaiveDateTime,
        sample_rate: f64,
        channels: Vec<Vec<f64>>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!(
                "sample_rate must be positive, got {sample_rate}"
            )));
        }
        let len = channels.first().map(Vec::len).unwrap_or(0);
        if len == 0 {
            return Err(Error::format("recording has no samples"));
        }
        if let Some(bad) = channels.iter().position(|c| c.len() != len) {
            return Err(Error::format(format!(
                "channel {bad} has {} samples, expected {len}",
                channels[bad].len()
            )));
        }
        for (c, ch) in channels.iter().enumerate() {
            if let Some(k) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::format(format!(
                    "channel {c} sample {k} is not finite"
                )));
            }
        }
        Ok(Self {
            timestamp,
            sample_rate,
            channels,
            source_id: source_id.into(),
        })
    }

    pub fn timestamp(&self) -> NaiveDateTime {
        self.timestamp
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> Option<&[f64]> {
        self.channels.get(index).map(Vec::as_slice)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// IMS file name for this recording.
    pub fn file_name(&self) -> String {
        self.timestamp.format(NAME_FORMAT).to_string()
    }
}

/// Source metadata for a recording campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source_id: String,
    pub sample_rate: f64,
    /// Human label for each channel, e.g. `"bearing 1 x"`.
    pub channel_labels: Vec<String>,
    /// Present when the dataset was generated by [`synth_run_to_failure`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

/// A campaign of recordings in strictly ascending time order.
#[derive(Debug, Clone)]
pub struct RecordingSet {
    recordings: Vec<RawRecording>,
    manifest: DatasetManifest,
}

impl RecordingSet {
    pub fn new(recordings: Vec<RawRecording>, manifest: DatasetManifest) -> Result<Self> {
        for (i, pair) in recordings.windows(2).enumerate() {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(Error::Sequencing {
                    index: i + 1,
                    message: "recording timestamps must be strictly increasing".into(),
                });
            }
        }
        if let Some(first) = recordings.first() {
            for (i, rec) in recordings.iter().enumerate() {
                if rec.sample_rate != first.sample_rate {
                    return Err(Error::format(format!(
                        "recording {i} has sample rate {} but the set uses {}",
                        rec.sample_rate, first.sample_rate
                    )));
                }
                if rec.n_channels() != first.n_channels() {
                    return Err(Error::format(format!(
                        "recording {i} has {} channels but the set uses {}",
                        rec.n_channels(),
                        first.n_channels()
                    )));
                }
            }
        }
        Ok(Self {
            recordings,
            manifest,
        })
    }

    pub fn recordings(&self) -> &[RawRecording] {
        &self.recordings
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }
}

/// Parses the body of an IMS measurement file into per-channel sample vectors.
///
/// Tabs and runs of spaces are both accepted as delimiters; blank lines are
/// skipped. Line numbers in errors are zero-based and count blank lines.
pub fn parse_ims_file(text: &[u8], expected_channels: Option<usize>) -> Result<Vec<Vec<f64>>> {
    parse_ims_columns(text, expected_channels, None)
}

/// Like [`parse_ims_file`] but keeps only the listed columns, in the listed
/// order. Columns that are not kept are counted but not parsed.
pub fn parse_ims_columns(
    text: &[u8],
    expected_channels: Option<usize>,
    keep: Option<&[usize]>,
) -> Result<Vec<Vec<f64>>> {
    let mut width = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    // Output slot of each input column, filled once the width is known.
    let mut slot: Vec<Option<usize>> = Vec::new();
    let mut row: Vec<&[u8]> = Vec::new();
    for (line_no, line) in text.split(|&b| b == b'\n').enumerate() {
        row.clear();
        row.extend(
            line.split(|b| b.is_ascii_whitespace())
                .filter(|t| !t.is_empty()),
        );
        if row.is_empty() {
            continue;
        }
        let n = *width.get_or_insert_with(|| {
            slot = vec![None; row.len()];
            match keep {
                Some(cols) => cols.iter().enumerate().for_each(|(k, &c)| {
                    if let Some(s) = slot.get_mut(c) {
                        *s = Some(k);
                    }
                }),
                None => slot.iter_mut().enumerate().for_each(|(k, s)| *s = Some(k)),
            }
            columns =
                vec![Vec::with_capacity(IMS_SEGMENT_LEN); keep.map_or(row.len(), <[usize]>::len)];
            row.len()
        });
        if row.len() != n {
            return Err(Error::format(format!(
                "line {line_no}: {} columns, expected {n}",
                row.len()
            )));
        }
        for (token, s) in row.iter().zip(&slot) {
            if let Some(k) = *s {
                let v = parse_sample(token).ok_or_else(|| Error::Parse {
                    line: line_no,
                    token: String::from_utf8_lossy(token).into_owned(),
                })?;
                columns[k].push(v);
            }
        }
    }
    let Some(n) = width else {
        return Err(Error::format("empty input"));
    };
    if let Some(expected) = expected_channels {
        if expected != n {
            return Err(Error::format(format!(
                "expected {expected} channels, found {n}"
            )));
        }
    }
    if let Some(&c) = keep.and_then(|cols| cols.iter().find(|&&c| c >= n)) {
        return Err(Error::format(format!(
            "channel {c} requested but the file has {n} columns"
        )));
    }
    Ok(columns)
}

const POW10: [f64; 16] = [
    1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15,
];

/// Parses one finite sample. Plain decimals of up to 15 significant digits
/// take the exact fast path (integer mantissa over an exact power of ten,
/// one correctly rounded division); anything else goes through `str::parse`.
fn parse_sample(token: &[u8]) -> Option<f64> {
    let (negative, digits) = match token.first() {
        Some(b'-') => (true, &token[1..]),
        Some(b'+') => (false, &token[1..]),
        _ => (false, token),
    };
    let mut mantissa: u64 = 0;
    let mut n_digits = 0usize;
    let mut frac_digits = 0usize;
    let mut seen_point = false;
    let mut simple = !digits.is_empty();
    for &b in digits {
        match b {
            b'0'..=b'9' => {
                mantissa = mantissa * 10 + u64::from(b - b'0');
                n_digits += 1;
                frac_digits += usize::from(seen_point);
                if n_digits > 15 {
                    simple = false;
                    break;
                }
            }
            b'.' if !seen_point => seen_point = true,
            _ => {
                simple = false;
                break;
            }
        }
    }
    if simple && n_digits > 0 {
        let v = mantissa as f64 / POW10[frac_digits];
        return Some(if negative { -v } else { v });
    }
    let v: f64 = std::str::from_utf8(token).ok()?.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Writes samples in IMS layout with a fixed number of decimals and tab
/// delimiters. Values already on the `10^-decimals` grid survive a
/// write/parse cycle bit-for-bit.
pub fn write_ims(recording: &RawRecording, decimals: usize) -> String {
    let n = recording.len();
    let mut out = String::with_capacity(n * recording.n_channels() * (decimals + 4));
    for k in 0..n {
        for (c, ch) in recording.channels.iter().enumerate() {
            if c > 0 {
                out.push('\t');
            }
            let _ = write!(out, "{:.*}", decimals, ch[k]);
        }
        out.push('\n');
    }
    out
}

/// Parses an IMS file name such as `2004.02.13.15.52.39`.
pub fn parse_recording_name(name: &str) -> Option<NaiveDateTime> {
    let fields: Vec<&str> = name.split('.').collect();
    if fields.len() != 6
        || fields
            .iter()
            .any(|f| f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    NaiveDateTime::parse_from_str(name, NAME_FORMAT).ok()
}

/// Result of [`enumerate_recordings`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Enumeration {
    /// Parseable names sorted strictly ascending by timestamp.
    pub entries: Vec<(NaiveDateTime, String)>,
    /// Names that do not match the timestamp pattern, in input order.
    pub rejects: Vec<String>,
}

/// Orders IMS file names by the timestamp they encode.
pub fn enumerate_recordings<S: AsRef<str>>(file_names: &[S]) -> Result<Enumeration> {
    let mut out = Enumeration::default();
    for name in file_names {
        let name = name.as_ref();
        match parse_recording_name(name) {
            Some(ts) => out.entries.push((ts, name.to_string())),
            None => out.rejects.push(name.to_string()),
        }
    }
    out.entries.sort_by_key(|e| e.0);
    if let Some(pair) = out.entries.windows(2).find(|p| p[0].0 == p[1].0) {
        return Err(Error::DuplicateTimestamp(pair[1].0.to_string()));
    }
    Ok(out)
}

/// Options for [`load_dataset`]. A `manifest.json` in the directory takes
/// precedence over `sample_rate`.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub sample_rate: f64,
    pub expected_channels: Option<usize>,
    pub source_id: String,
    /// Keep only these columns, in this order. `None` keeps all of them.
    pub channels: Option<Vec<usize>>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            sample_rate: IMS_SAMPLE_RATE,
            expected_channels: None,
            source_id: "ims".into(),
            channels: None,
        }
    }
}

/// A dataset loaded from disk plus the directory entries that were ignored.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub set: RecordingSet,
    pub rejects: Vec<String>,
}

/// Reads every timestamp-named file in `dir`. Files are parsed in parallel.
pub fn load_dataset(dir: &Path, options: &LoadOptions) -> Result<LoadedDataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let stored: Option<DatasetManifest> = if manifest_path.is_file() {
        Some(serde_json::from_slice(&fs::read(&manifest_path)?)?)
    } else {
        None
    };
    let mut names = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    let mut listing = enumerate_recordings(&names)?;
    listing.rejects.retain(|n| n != MANIFEST_FILE);

    let (sample_rate, source_id) = match &stored {
        Some(m) => (m.sample_rate, m.source_id.clone()),
        None => (options.sample_rate, options.source_id.clone()),
    };
    let recordings = listing
        .entries
        .par_iter()
        .map(|(ts, name)| {
            let bytes = fs::read(dir.join(name))?;
            let channels = parse_ims_columns(
                &bytes,
                options.expected_channels,
                options.channels.as_deref(),
            )
            .map_err(|e| Error::format(format!("{name}: {e}")))?;
            RawRecording::new(*ts, sample_rate, channels, source_id.clone())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = match stored {
        Some(m) => m,
        None => DatasetManifest {
            source_id,
            sample_rate,
            channel_labels: (0..recordings.first().map_or(0, RawRecording::n_channels))
                .map(|c| format!("channel {}", c + 1))
                .collect(),
            synth: None,
        },
    };
    if let Some(cols) = &options.channels {
        let labels = &manifest.channel_labels;
        manifest.channel_labels = cols
            .iter()
            .map(|&c| {
                labels
                    .get(c)
                    .cloned()
                    .unwrap_or_else(|| format!("channel {}", c + 1))
            })
            .collect();
    }
    Ok(LoadedDataset {
        set: RecordingSet::new(recordings, manifest)?,
        rejects: listing.rejects,
    })
}

/// Writes every recording as an IMS file plus `manifest.json`.
pub fn write_dataset(set: &RecordingSet, dir: &Path, decimals: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    set.recordings
        .par_iter()
        .try_for_each(|rec| -> Result<()> {
            fs::write(dir.join(rec.file_name()), write_ims(rec, decimals))?;
            Ok(())
        })?;
    let mut json = serde_json::to_string_pretty(&set.manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(())
}

/// Parameters of the synthetic run-to-failure generator.
///
/// Channel 0 carries the degrading bearing; any further channels stay healthy.
/// Stage `s` covers recordings `stage_boundaries[s-1] .. stage_boundaries[s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub sample_rate: f64,
    pub segment_len: usize,
    pub n_recordings: usize,
    pub n_channels: usize,
    pub stage_boundaries: Vec<usize>,
    pub shaft_freq: f64,
    pub shaft_amplitude: f64,
    /// Relative per-recording spread of the shaft amplitude (load variation).
    pub load_jitter: f64,
    pub fault_freq: f64,
    pub fault_gain_per_stage: Vec<f64>,
    /// Amplitude of the narrow band noise around `fault_freq`, per unit fault gain.
    pub band_noise: f64,
    pub noise_floor: f64,
    pub start: NaiveDateTime,
    pub interval_secs: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate: IMS_SAMPLE_RATE,
            segment_len: IMS_SEGMENT_LEN,
            n_recordings: 600,
            n_channels: 1,
            stage_boundaries: vec![340, 450, 540],
            shaft_freq: 2000.0 / 60.0,
            shaft_amplitude: 0.5,
            load_jitter: 0.1,
            fault_freq: 236.4,
            fault_gain_per_stage: vec![0.0, 0.15, 0.4, 1.0],
            band_noise: 0.5,
            noise_floor: 0.05,
            start: NaiveDate::from_ymd_opt(2004, 2, 12)
                .and_then(|d| d.and_hms_opt(10, 32, 39))
                .expect("valid date"),
            interval_secs: 600,
        }
    }
}

const BAND_COMPONENTS: usize = 16;
const SAMPLE_GRID: f64 = 1e6;
/// Decimals matching the generator's quantization grid.
pub const SYNTH_DECIMALS: usize = 6;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            bad.push("sample_rate must be positive".to_string());
        }
        if self.segment_len < 2 {
            bad.push("segment_len must be at least 2".into());
        }
        if self.n_recordings == 0 {
            bad.push("n_recordings must be positive".into());
        }
        if self.n_channels == 0 {
            bad.push("n_channels must be positive".into());
        }
        if self.stage_boundaries.windows(2).any(|w| w[1] <= w[0]) {
            bad.push("stage_boundaries must be strictly increasing".into());
        }
        if self.stage_boundaries.first() == Some(&0) {
            bad.push("stage_boundaries must leave a non-empty healthy stage".into());
        }
        if self
            .stage_boundaries
            .last()
            .is_some_and(|&b| b >= self.n_recordings)
        {
            bad.push("stage_boundaries must all be below n_recordings".into());
        }
        if self.fault_gain_per_stage.len() != self.stage_boundaries.len() + 1 {
            bad.push(format!(
                "fault_gain_per_stage needs {} entries (one per stage)",
                self.stage_boundaries.len() + 1
            ));
        }
        if self
            .fault_gain_per_stage
            .iter()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            bad.push("fault_gain_per_stage entries must be non-negative".into());
        }
        if self.fault_gain_per_stage.windows(2).any(|w| w[1] < w[0]) {
            bad.push("fault_gain_per_stage must be non-decreasing".into());
        }
        let nyquist = self.sample_rate / 2.0;
        for (name, f) in [
            ("shaft_freq", self.shaft_freq),
            ("fault_freq", self.fault_freq),
        ] {
            if !(f.is_finite() && f > 0.0 && f < nyquist) {
                bad.push(format!("{name} must lie in (0, sample_rate/2)"));
            }
        }
        if self.fault_freq.is_nan() || self.fault_freq * 2.2 >= nyquist {
            bad.push("fault_freq harmonics must stay below sample_rate/2".into());
        }
        for (name, v) in [
            ("shaft_amplitude", self.shaft_amplitude),
            ("band_noise", self.band_noise),
            ("noise_floor", self.noise_floor),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                bad.push(format!("{name} must be non-negative"));
            }
        }
        if !(self.load_jitter.is_finite() && (0.0..1.0).contains(&self.load_jitter)) {
            bad.push("load_jitter must lie in [0, 1)".into());
        }
        if self.interval_secs <= 0 {
            bad.push("interval_secs must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Stage index (0 = healthy) of recording `index`.
    pub fn stage_of(&self, index: usize) -> usize {
        self.stage_boundaries
            .iter()
            .take_while(|&&b| b <= index)
            .count()
    }

    pub fn timestamp_of(&self, index: usize) -> NaiveDateTime {
        self.start + TimeDelta::seconds(self.interval_secs * index as i64)
    }
}

/// Generates a deterministic synthetic run-to-failure campaign.
///
/// Every recording gets a shaft sinusoid with a per-recording load factor and
/// white noise. From the first degradation stage on, channel 0 also gets
/// sinusoids at `fault_freq` and `2 * fault_freq` plus narrow band noise
/// around `fault_freq`, all scaled by the stage's fault gain. Samples are
/// quantized to 1e-6 so the IMS text form is exact.
pub fn synth_run_to_failure(config: &SynthConfig) -> Result<RecordingSet> {
    config.validate()?;
    let source_id = format!("synth-{}", config.seed);
    let recordings = (0..config.n_recordings)
        .into_par_iter()
        .map(|index| synth_recording(config, index, &source_id))
        .collect::<Result<Vec<_>>>()?;
    let channel_labels = (0..config.n_channels)
        .map(|c| {
            if c == 0 {
                "bearing under test".to_string()
            } else {
                format!("healthy bearing {c}")
            }
        })
        .collect();
    let manifest = DatasetManifest {
        source_id,
        sample_rate: config.sample_rate,
        channel_labels,
        synth: Some(config.clone()),
    };
    RecordingSet::new(recordings, manifest)
}

fn synth_recording(config: &SynthConfig, index: usize, source_id: &str) -> Result<RawRecording> {
    use std::f64::consts::TAU;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let gain = config.fault_gain_per_stage[config.stage_of(index)];
    let dt = 1.0 / config.sample_rate;

    let channels = (0..config.n_channels)
        .map(|c| {
            let load = 1.0 + config.load_jitter * rng.gen_range(-1.0..=1.0);
            let shaft_amp = config.shaft_amplitude * load;
            let shaft_phase = rng.gen_range(0.0..TAU);
            let faulty = c == 0 && gain > 0.0;
            let fault_phase = [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)];
            let band: Vec<(f64, f64)> = (0..BAND_COMPONENTS)
                .map(|_| {
                    let f = config.fault_freq * rng.gen_range(0.9..1.1);
                    (f, rng.gen_range(0.0..TAU))
                })
                .collect();
            let band_amp = gain * config.band_noise / (BAND_COMPONENTS as f64).sqrt();

            (0..config.segment_len)
                .map(|k| {
                    let t = k as f64 * dt;
                    let mut x = shaft_amp * (TAU * config.shaft_freq * t + shaft_phase).sin();
                    if faulty {
                        x += gain * (TAU * config.fault_freq * t + fault_phase[0]).sin();
                        x +=
                            0.5 * gain * (TAU * 2.0 * config.fault_freq * t + fault_phase[1]).sin();
                        for &(f, phase) in &band {
                            x += band_amp * (TAU * f * t + phase).sin();
                        }
                    }
                    let noise: f64 = rng.sample(StandardNormal);
                    x += config.noise_floor * noise;
                    (x * SAMPLE_GRID).round() / SAMPLE_GRID
                })
                .collect()
        })
        .collect();
    RawRecording::new(
        config.timestamp_of(index),
        config.sample_rate,
        channels,
        source_id,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn small_config() -> SynthConfig {
        SynthConfig {
            segment_len: 512,
            sample_rate: 5000.0,
            n_recordings: 12,
            stage_boundaries: vec![3, 6, 9],
            fault_freq: 400.0,
            n_channels: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn parses_ims_shape() {
        let mut text = String::new();
        for k in 0..20480 {
            let row: Vec<String> = (0..8)
                .map(|c| format!("{:.3}", (k * 8 + c) as f64 * 1e-3))
                .collect();
            text.push_str(&row.join("\t"));
            text.push('\n');
        }
        let ch = parse_ims_file(text.as_bytes(), Some(8)).unwrap();
        assert_eq!(ch.len(), 8);
        assert!(ch.iter().all(|c| c.len() == 20480));
        assert_eq!(ch[3][2], 0.019);
    }

    #[test]
    fn parses_single_line() {
        let ch = parse_ims_file(b"0.0\t0.0", None).unwrap();
        assert_eq!(ch, vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn parse_errors() {
        match parse_ims_file(b"1 2\n3 x\n", None) {
            Err(Error::Parse { line, token }) => {
                assert_eq!(line, 1);
                assert_eq!(token, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_ims_file(b"1 2\n3\n", None),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_ims_file(b"1 2\n3 4 5\n", None),
            Err(Error::Format(_))
        ));
        assert!(matches!(parse_ims_file(b"", None), Err(Error::Format(_))));
        assert!(matches!(
            parse_ims_file(b"\n  \n", None),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_ims_file(b"1 2\n", Some(8)),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_ims_file(b"nan 2\n", None),
            Err(Error::Parse { .. })
        ));
        let picked = parse_ims_columns(b"1 2 3\n4 5 6\n", Some(3), Some(&[2, 0])).unwrap();
        assert_eq!(picked, vec![vec![3.0, 6.0], vec![1.0, 4.0]]);
        // Unkept columns are not parsed.
        assert!(parse_ims_columns(b"1 x\n", None, Some(&[0])).is_ok());
        assert!(matches!(
            parse_ims_columns(b"1 2\n", None, Some(&[2])),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn recording_invariants() {
        let t = ts("2004-02-13T15:52:39");
        assert!(RawRecording::new(t, 0.0, vec![vec![1.0]], "x").is_err());
        assert!(RawRecording::new(t, 1.0, vec![vec![1.0], vec![]], "x").is_err());
        assert!(RawRecording::new(t, 1.0, vec![vec![]], "x").is_err());
        assert!(RawRecording::new(t, 1.0, vec![vec![f64::NAN]], "x").is_err());
        let rec = RawRecording::new(t, 1.0, vec![vec![1.0, 2.0]], "x").unwrap();
        assert_eq!(rec.file_name(), "2004.02.13.15.52.39");
    }

    #[test]
    fn enumerates_paper_name() {
        let e = enumerate_recordings(&["2004.02.13.15.52.39"]).unwrap();
        assert_eq!(
            e.entries,
            vec![(ts("2004-02-13T15:52:39"), "2004.02.13.15.52.39".to_string())]
        );
        assert!(e.rejects.is_empty());
        assert_eq!(
            enumerate_recordings::<&str>(&[]).unwrap(),
            Enumeration::default()
        );
    }

    #[test]
    fn enumerate_sorts_and_rejects() {
        let cfg = SynthConfig::default();
        let mut names: Vec<String> = (0..10)
            .map(|i| cfg.timestamp_of(i * 7).format(NAME_FORMAT).to_string())
            .collect();
        let sorted = names.clone();
        // deterministic shuffle
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in (1..names.len()).rev() {
            names.swap(i, rng.gen_range(0..=i));
        }
        names.push("README.txt".into());
        names.push("2004.02.13.15.52".into());
        let e = enumerate_recordings(&names).unwrap();
        let got: Vec<String> = e.entries.iter().map(|(_, n)| n.clone()).collect();
        assert_eq!(got, sorted);
        assert_eq!(
            e.rejects,
            vec!["README.txt".to_string(), "2004.02.13.15.52".to_string()]
        );
    }

    #[test]
    fn enumerate_duplicate_is_error() {
        let names = ["2004.02.13.15.52.39", "2004.2.13.15.52.39"];
        assert!(matches!(
            enumerate_recordings(&names),
            Err(Error::DuplicateTimestamp(_))
        ));
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_run_to_failure(&small_config()).unwrap();
        let b = synth_run_to_failure(&small_config()).unwrap();
        assert_eq!(a.recordings(), b.recordings());
        let mut other = small_config();
        other.seed = 1;
        let c = synth_run_to_failure(&other).unwrap();
        assert_ne!(a.recordings()[0], c.recordings()[0]);
    }

    #[test]
    fn synth_validation_names_fields() {
        let cfg = SynthConfig {
            stage_boundaries: vec![5, 3, 9],
            ..small_config()
        };
        match synth_run_to_failure(&cfg) {
            Err(Error::Validation(fields)) => {
                assert!(
                    fields.iter().any(|f| f.contains("stage_boundaries")),
                    "{fields:?}"
                )
            }
            other => panic!("unexpected {other:?}"),
        }
        let cfg = SynthConfig {
            fault_gain_per_stage: vec![0.0, 1.0, 0.5, 2.0],
            ..small_config()
        };
        assert!(matches!(cfg.validate(), Err(Error::Validation(_))));
        let cfg = SynthConfig {
            stage_boundaries: vec![3, 6, 12],
            ..small_config()
        };
        assert!(matches!(cfg.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn ims_round_trip_of_synthetic_recording() {
        let set = synth_run_to_failure(&small_config()).unwrap();
        for rec in set.recordings() {
            let text = write_ims(rec, SYNTH_DECIMALS);
            let channels = parse_ims_file(text.as_bytes(), Some(2)).unwrap();
            assert_eq!(channels.as_slice(), rec.channels());
        }
    }

    #[test]
    fn dataset_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let set = synth_run_to_failure(&small_config()).unwrap();
        write_dataset(&set, dir.path(), SYNTH_DECIMALS).unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let loaded = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
        assert_eq!(loaded.rejects, vec!["notes.txt".to_string()]);
        assert_eq!(loaded.set.recordings(), set.recordings());
        assert_eq!(loaded.set.manifest(), set.manifest());
    }

    #[test]
    fn stages_follow_boundaries() {
        let cfg = small_config();
        let stages: Vec<usize> = (0..12).map(|i| cfg.stage_of(i)).collect();
        assert_eq!(stages, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn recording_set_rejects_unordered() {
        let t0 = ts("2004-02-13T15:52:39");
        let a = RawRecording::new(t0, 1.0, vec![vec![0.0]], "x").unwrap();
        let manifest = DatasetManifest {
            source_id: "x".into(),
            sample_rate: 1.0,
            channel_labels: vec![],
            synth: None,
        };
        assert!(RecordingSet::new(vec![a.clone(), a], manifest).is_err());
    }

    proptest::proptest! {
        #[test]
        fn sample_parser_agrees_with_std(x in -1e6..1e6f64, decimals in 0usize..12) {
            let text = format!("{x:.decimals$}");
            let want: f64 = text.parse().unwrap();
            proptest::prop_assert_eq!(parse_sample(text.as_bytes()).map(f64::to_bits), Some(want.to_bits()));
        }
    }

    #[test]
    fn sample_parser_edge_cases() {
        for t in [
            "-0.0",
            "+1.5",
            "1.",
            ".5",
            "1e-3",
            "2E2",
            "123456789012345678",
            "0.0000000000000001",
        ] {
            assert_eq!(
                parse_sample(t.as_bytes()),
                Some(t.parse::<f64>().unwrap()),
                "{t}"
            );
        }
        for t in ["-", ".", "1..2", "inf", "NaN", "1,5", ""] {
            assert_eq!(parse_sample(t.as_bytes()), None, "{t}");
        }
    }
}
