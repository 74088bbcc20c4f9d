//! Time-domain segment to full-spectrum vector.
//!
//! A segment is Hann-windowed, zero-padded to a power-of-two transform length,
//! transformed, reduced to the magnitudes of the positive-frequency bins
//! `0 .. transform_len / 2` (DC kept, Nyquist dropped) and finally smoothed by
//! averaging non-overlapping blocks of `smoothing_block` bins. For IMS data
//! (20 480 samples at 20 kHz, padded to 32 768) that yields 16 384 raw bins
//! and 128 smoothed dimensions, 78.125 Hz wide each.

use std::io::{Read, Write};
use std::sync::Arc;

use chrono::{NaiveDateTime, TimeDelta};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{RawRecording, RecordingSet, IMS_SEGMENT_LEN};

/// Timestamp layout used by every CSV artifact.
pub const CSV_TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hann,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub segment_len: usize,
    /// Power of two, at least `segment_len`.
    pub transform_len: usize,
    /// Number of adjacent bins averaged into one dimension.
    pub smoothing_block: usize,
    pub window: Window,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            segment_len: IMS_SEGMENT_LEN,
            transform_len: 32_768,
            smoothing_block: 128,
            window: Window::Hann,
        }
    }
}

impl PreprocessConfig {
    /// Smallest valid config for a segment length: next power of two, no smoothing.
    pub fn for_segment(segment_len: usize) -> Self {
        Self {
            segment_len,
            transform_len: segment_len.max(2).next_power_of_two(),
            smoothing_block: 1,
            window: Window::Hann,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.segment_len < 2 {
            bad.push("segment_len must be at least 2".to_string());
        }
        if !self.transform_len.is_power_of_two() || self.transform_len < 2 {
            bad.push(format!(
                "transform_len {} is not a power of two",
                self.transform_len
            ));
        }
        if self.transform_len < self.segment_len {
            bad.push(format!(
                "transform_len {} is shorter than segment_len {}",
                self.transform_len, self.segment_len
            ));
        }
        if self.smoothing_block == 0 || (self.transform_len / 2) % self.smoothing_block != 0 {
            bad.push(format!(
                "smoothing_block {} does not divide {} positive bins",
                self.smoothing_block,
                self.transform_len / 2
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn positive_bins(&self) -> usize {
        self.transform_len / 2
    }

    /// Dimension of the resulting spectrum vectors.
    pub fn dims(&self) -> usize {
        self.transform_len / (2 * self.smoothing_block)
    }

    /// Width in Hz of one smoothed dimension.
    pub fn bin_width(&self, sample_rate: f64) -> f64 {
        sample_rate / self.transform_len as f64 * self.smoothing_block as f64
    }
}

/// The n-dimensional smoothed magnitude spectrum of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumVector {
    values: Vec<f64>,
    bin_width: f64,
    timestamp: NaiveDateTime,
    source_id: String,
}

impl SpectrumVector {
    pub fn new(
        values: Vec<f64>,
        bin_width: f64,
        timestamp: NaiveDateTime,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::size("spectrum vector must have at least one value"));
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::format(format!(
                "spectrum value {k} is {} (must be finite and non-negative)",
                values[k]
            )));
        }
        Ok(Self {
            values,
            bin_width,
            timestamp,
            source_id: source_id.into(),
        })
    }

    /// The all-zero vector of dimension `dims`.
    pub fn zero(
        dims: usize,
        bin_width: f64,
        timestamp: NaiveDateTime,
        source_id: impl Into<String>,
    ) -> Self {
        Self {
            values: vec![0.0; dims],
            bin_width,
            timestamp,
            source_id: source_id.into(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn timestamp(&self) -> NaiveDateTime {
        self.timestamp
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Center frequency of dimension `j` in Hz.
    pub fn bin_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.bin_width
    }
}

/// Hann window applied to a segment: `x[k] * 0.5 * (1 - cos(2πk / (L-1)))`.
pub fn hann_window(segment: &[f64]) -> Result<Vec<f64>> {
    let len = segment.len();
    if len < 2 {
        return Err(Error::size(format!(
            "Hann window needs at least 2 samples, got {len}"
        )));
    }
    let denom = (len - 1) as f64;
    Ok(segment
        .iter()
        .enumerate()
        .map(|(k, &x)| x * 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / denom).cos()))
        .collect())
}

/// Block average of `spectrum` with `block` bins per output value.
pub fn smooth(spectrum: &[f64], block: usize) -> Result<Vec<f64>> {
    if block == 0 || spectrum.len() % block != 0 {
        return Err(Error::size(format!(
            "smoothing block {block} does not divide spectrum length {}",
            spectrum.len()
        )));
    }
    let scale = 1.0 / block as f64;
    Ok(spectrum
        .chunks_exact(block)
        .map(|c| c.iter().sum::<f64>() * scale)
        .collect())
}

/// Positive-bin magnitudes of the zero-padded DFT of `segment`, without windowing.
pub fn dft_magnitude(segment: &[f64], config: &PreprocessConfig) -> Result<Vec<f64>> {
    SpectrumAnalyzer::new(config.clone())?.magnitudes(segment)
}

/// A validated config with its FFT plan. Cheap to share between threads.
#[derive(Clone)]
pub struct SpectrumAnalyzer {
    config: PreprocessConfig,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("config", &self.config)
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(config: PreprocessConfig) -> Result<Self> {
        config.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(config.transform_len);
        Ok(Self { config, fft })
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn magnitudes(&self, segment: &[f64]) -> Result<Vec<f64>> {
        let n = self.config.transform_len;
        if segment.len() > n {
            return Err(Error::size(format!(
                "segment of {} samples exceeds transform length {n}",
                segment.len()
            )));
        }
        let mut buf: Vec<Complex<f64>> = segment.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf.truncate(n / 2);
        Ok(buf.into_iter().map(|c| c.norm()).collect())
    }

    /// Window, transform and smooth one segment into its spectrum values.
    pub fn spectrum(&self, segment: &[f64]) -> Result<Vec<f64>> {
        let windowed = match self.config.window {
            Window::Hann => hann_window(segment)?,
            Window::None => segment.to_vec(),
        };
        let mags = self.magnitudes(&windowed)?;
        smooth(&mags, self.config.smoothing_block)
    }

    pub fn process(&self, rec: &RawRecording, channel: usize) -> Result<SpectrumVector> {
        let samples = channel_of(rec, channel)?;
        if samples.len() != self.config.segment_len {
            return Err(Error::size(format!(
                "channel has {} samples but segment_len is {}",
                samples.len(),
                self.config.segment_len
            )));
        }
        let values = self.spectrum(samples)?;
        SpectrumVector::new(
            values,
            self.config.bin_width(rec.sample_rate()),
            rec.timestamp(),
            rec.source_id(),
        )
    }

    /// Splits the channel into consecutive non-overlapping segments of
    /// `segment_len` samples; a trailing partial segment is dropped. Segment
    /// `s` is stamped with the recording time plus its whole-second offset.
    pub fn process_segments(
        &self,
        rec: &RawRecording,
        channel: usize,
    ) -> Result<Vec<SpectrumVector>> {
        let samples = channel_of(rec, channel)?;
        let seg = self.config.segment_len;
        if samples.len() < seg {
            return Err(Error::size(format!(
                "channel has {} samples, fewer than segment_len {seg}",
                samples.len()
            )));
        }
        let bin_width = self.config.bin_width(rec.sample_rate());
        samples
            .chunks_exact(seg)
            .enumerate()
            .map(|(s, chunk)| {
                let offset = (s * seg) as f64 / rec.sample_rate();
                let ts = rec.timestamp() + TimeDelta::seconds(offset.floor() as i64);
                SpectrumVector::new(self.spectrum(chunk)?, bin_width, ts, rec.source_id())
            })
            .collect()
    }
}

fn channel_of(rec: &RawRecording, channel: usize) -> Result<&[f64]> {
    rec.channel(channel).ok_or_else(|| {
        Error::size(format!(
            "channel {channel} out of range ({} channels)",
            rec.n_channels()
        ))
    })
}

/// Window, transform and smooth one channel of a recording.
pub fn preprocess_recording(
    rec: &RawRecording,
    channel: usize,
    config: &PreprocessConfig,
) -> Result<SpectrumVector> {
    SpectrumAnalyzer::new(config.clone())?.process(rec, channel)
}

/// Preprocesses every recording of a set in parallel; output keeps set order.
pub fn preprocess_set(
    set: &RecordingSet,
    channel: usize,
    config: &PreprocessConfig,
) -> Result<Vec<SpectrumVector>> {
    let analyzer = SpectrumAnalyzer::new(config.clone())?;
    set.recordings()
        .par_iter()
        .map(|rec| analyzer.process(rec, channel))
        .collect()
}

/// Writes vectors as CSV: `timestamp,source_id,<bin center Hz>...` header,
/// one vector per row.
pub fn write_spectra_csv<W: Write>(out: W, vectors: &[SpectrumVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = vectors.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header = vec!["timestamp".to_string(), "source_id".to_string()];
    header.extend((0..first.dims()).map(|j| first.bin_center(j).to_string()));
    w.write_record(&header)?;
    for v in vectors {
        if v.dims() != first.dims() {
            return Err(Error::size(
                "all vectors in a CSV batch must share a dimension",
            ));
        }
        let mut row = vec![
            v.timestamp.format(CSV_TIME_FORMAT).to_string(),
            v.source_id.clone(),
        ];
        row.extend(v.values.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a batch written by [`write_spectra_csv`].
pub fn read_spectra_csv<R: Read>(input: R) -> Result<Vec<SpectrumVector>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 {
        return Err(Error::format(
            "spectrum CSV needs timestamp, source_id and at least one bin",
        ));
    }
    let centers: Vec<f64> = header
        .iter()
        .skip(2)
        .map(|h| {
            h.parse()
                .map_err(|_| Error::format(format!("bad bin center {h:?}")))
        })
        .collect::<Result<_>>()?;
    let bin_width = if centers.len() > 1 {
        centers[1] - centers[0]
    } else {
        2.0 * centers[0]
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let ts = NaiveDateTime::parse_from_str(&rec[0], CSV_TIME_FORMAT)
            .map_err(|e| Error::format(format!("row {line}: bad timestamp: {e}")))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: line + 1,
                    token: t.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(SpectrumVector::new(values, bin_width, ts, &rec[1])?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn t0() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2004, 2, 13)
            .unwrap()
            .and_hms_opt(15, 52, 39)
            .unwrap()
    }

    #[test]
    fn hann_endpoints_and_peak() {
        let w = hann_window(&[3.0; 9]).unwrap();
        assert_eq!(w[0], 0.0);
        assert!(w[8].abs() < 1e-15);
        assert!((w[4] - 3.0).abs() < 1e-15);
        assert!(matches!(hann_window(&[1.0]), Err(Error::Size(_))));
    }

    #[test]
    fn hann_matches_coefficient_table() {
        // 0.5 * (1 - cos(2πk/7)) for k = 0..8, evaluated independently.
        let table = [
            0.0,
            0.188_255_099_070_633_2,
            0.611_260_466_978_157_2,
            0.950_484_433_951_209_6,
            0.950_484_433_951_209_6,
            0.611_260_466_978_157_2,
            0.188_255_099_070_633_2,
            0.0,
        ];
        let w = hann_window(&[1.0; 8]).unwrap();
        for (a, b) in w.iter().zip(table) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn smooth_cases() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        assert_eq!(smooth(&x, 1).unwrap(), x);
        assert_eq!(smooth(&x, 8).unwrap(), vec![3.5, 11.5]);
        assert!(matches!(smooth(&x, 3), Err(Error::Size(_))));
        assert_eq!(smooth(&vec![1.0; 16384], 128).unwrap().len(), 128);
    }

    #[test]
    fn dc_only_spectrum() {
        let cfg = PreprocessConfig {
            window: Window::None,
            ..PreprocessConfig::for_segment(256)
        };
        let mags = dft_magnitude(&[2.5; 256], &cfg).unwrap();
        assert!((mags[0] - 640.0).abs() < 1e-9);
        assert!(mags[1..].iter().all(|m| *m < 1e-9 * mags[0]));
    }

    #[test]
    fn oversize_segment_rejected() {
        let cfg = PreprocessConfig::for_segment(64);
        assert!(matches!(
            dft_magnitude(&[0.0; 65], &cfg),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(PreprocessConfig::default().validate().is_ok());
        let bad = PreprocessConfig {
            transform_len: 30_000,
            ..PreprocessConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PreprocessConfig {
            transform_len: 16_384,
            ..PreprocessConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PreprocessConfig {
            smoothing_block: 96,
            ..PreprocessConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ims_defaults_give_128_dims() {
        let rec = RawRecording::new(t0(), 20_000.0, vec![vec![0.0; 20_480]], "B1T2").unwrap();
        let v = preprocess_recording(&rec, 0, &PreprocessConfig::default()).unwrap();
        assert_eq!(v.dims(), 128);
        assert_eq!(v.bin_width(), 78.125);
        assert_eq!(v.timestamp(), t0());
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn wrong_channel_or_length() {
        let rec = RawRecording::new(t0(), 20_000.0, vec![vec![0.0; 100]], "x").unwrap();
        assert!(preprocess_recording(&rec, 0, &PreprocessConfig::default()).is_err());
        assert!(preprocess_recording(&rec, 3, &PreprocessConfig::for_segment(100)).is_err());
    }

    #[test]
    fn multi_segment_split() {
        let rec = RawRecording::new(t0(), 100.0, vec![vec![1.0; 250]], "x").unwrap();
        let an = SpectrumAnalyzer::new(PreprocessConfig::for_segment(100)).unwrap();
        let segs = an.process_segments(&rec, 0).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].timestamp(), t0() + TimeDelta::seconds(1));
        assert_eq!(segs[0].values(), segs[1].values());
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let a = SpectrumVector::new(vec![0.1, 2.0, 1e-300], 78.125, t0(), "B1T2").unwrap();
        let b = SpectrumVector::new(
            vec![3.0, 0.0, 7.25],
            78.125,
            t0() + TimeDelta::minutes(10),
            "B1T2",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_spectra_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,source_id,39.0625,117.1875,195.3125\n"));
        let back = read_spectra_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn spectrum_vector_rejects_negative() {
        assert!(SpectrumVector::new(vec![-1.0], 1.0, t0(), "x").is_err());
        assert!(SpectrumVector::new(vec![], 1.0, t0(), "x").is_err());
    }
}
