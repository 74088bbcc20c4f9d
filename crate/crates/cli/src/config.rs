use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bearingmap::embed::{EmbedMethod, TsneConfig};
use bearingmap::ingest::SynthConfig;
use bearingmap::preprocess::PreprocessConfig;
use bearingmap::rtdt::AlertConfig;
use chrono::TimeDelta;
use serde::{Deserialize, Serialize};

use crate::Overrides;

pub const DEFAULT_REFERENCE_HOURS: f64 = 48.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InputSource {
    /// Directory of recordings.
    Dataset(PathBuf),
    /// Generated in memory.
    Synth(SynthConfig),
}

/// Length of the reference window at the start of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceWindow {
    Count(usize),
    /// Every recording within this many hours of the first one.
    Hours(f64),
}

impl Default for ReferenceWindow {
    fn default() -> Self {
        ReferenceWindow::Hours(DEFAULT_REFERENCE_HOURS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub input: Option<InputSource>,
    pub channel: usize,
    pub preprocess: PreprocessConfig,
    pub method: EmbedMethod,
    pub tsne: TsneConfig,
    pub reference: ReferenceWindow,
    pub alert: AlertConfig,
    pub out: PathBuf,
    /// Overrides the seeds nested in `tsne` and `input.synth`.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_id: "run".into(),
            input: None,
            channel: 0,
            preprocess: PreprocessConfig::default(),
            method: EmbedMethod::Mds,
            tsne: TsneConfig::default(),
            reference: ReferenceWindow::default(),
            alert: AlertConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Applies command-line flags on top of the file values, then propagates
    /// the seed.
    pub fn resolve(mut self, flags: &Overrides) -> anyhow::Result<Self> {
        if let Some(path) = &flags.input {
            self.input = Some(InputSource::Dataset(path.clone()));
        }
        if let Some(out) = &flags.out {
            self.out = out.clone();
        }
        if let Some(m) = flags.method {
            self.method = m;
        }
        if let Some(p) = flags.perplexity {
            self.tsne.perplexity = p;
        }
        if let Some(n) = flags.reference_count {
            self.reference = ReferenceWindow::Count(n);
        }
        if let Some(m) = flags.m_window {
            self.alert.window = m;
        }
        if let Some(t) = flags.threshold {
            self.alert.threshold = t;
        }
        if let Some(s) = flags.seed {
            self.seed = s;
        }
        if let Some(c) = flags.channel {
            self.channel = c;
        }
        if let Some(id) = &flags.run_id {
            self.run_id = id.clone();
        }
        self.tsne.seed = self.seed;
        if let Some(InputSource::Synth(s)) = &mut self.input {
            s.seed = self.seed;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let mut bad = Vec::new();
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            bad.push(format!(
                "run_id {:?} must be a non-empty file name",
                self.run_id
            ));
        }
        if let Some(InputSource::Dataset(p)) = &self.input {
            if !p.is_dir() {
                bad.push(format!("input: {} is not a directory", p.display()));
            }
        }
        if let Err(e) = self.preprocess.validate() {
            bad.push(format!("preprocess: {e}"));
        }
        if let ReferenceWindow::Hours(h) = self.reference {
            if !(h > 0.0 && h.is_finite()) {
                bad.push(format!("reference: hours {h} must be positive"));
            }
        }
        if self.alert.window == 0 {
            bad.push("alert.window must be at least 1".into());
        }
        if !self.alert.threshold.is_finite() {
            bad.push("alert.threshold must be finite".into());
        }
        if !(self.tsne.perplexity > 0.0 && self.tsne.perplexity.is_finite()) {
            bad.push(format!(
                "tsne.perplexity {} must be positive",
                self.tsne.perplexity
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            bail!("config: {}", bad.join("; "))
        }
    }

    /// Number of leading recordings that form the reference set.
    pub fn reference_len(&self, timestamps: &[chrono::NaiveDateTime]) -> anyhow::Result<usize> {
        let n = match self.reference {
            ReferenceWindow::Count(n) => n,
            ReferenceWindow::Hours(h) => {
                let Some(&first) = timestamps.first() else {
                    bail!("config: dataset is empty")
                };
                let end = first + TimeDelta::milliseconds((h * 3_600_000.0).round() as i64);
                timestamps.iter().take_while(|&&t| t < end).count()
            }
        };
        if n >= timestamps.len() {
            bail!(
                "config: reference window of {n} recordings leaves nothing to track in a dataset of {}",
                timestamps.len()
            );
        }
        if n < 3 {
            bail!("config: reference window holds {n} recordings, at least 3 are needed");
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let cfg = RunConfig {
            input: Some(InputSource::Synth(SynthConfig::default())),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        let partial: RunConfig =
            serde_json::from_str(r#"{"reference": {"count": 156}, "method": "tsne"}"#).unwrap();
        assert_eq!(partial.reference, ReferenceWindow::Count(156));
        assert_eq!(partial.method, EmbedMethod::Tsne);
        assert_eq!(partial.alert, AlertConfig::default());
    }

    #[test]
    fn flags_override_and_seed_propagates() {
        let cfg = RunConfig {
            input: Some(InputSource::Synth(SynthConfig::default())),
            ..Default::default()
        };
        let flags = Overrides {
            seed: Some(9),
            threshold: Some(3.0),
            reference_count: Some(10),
            ..Default::default()
        };
        let cfg = cfg.resolve(&flags).unwrap();
        assert_eq!(cfg.alert.threshold, 3.0);
        assert_eq!(cfg.reference, ReferenceWindow::Count(10));
        assert_eq!(cfg.tsne.seed, 9);
        assert!(matches!(cfg.input, Some(InputSource::Synth(ref s)) if s.seed == 9));
    }

    #[test]
    fn reference_window_lengths() {
        let t0 = chrono::NaiveDate::from_ymd_opt(2004, 2, 12)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let ts: Vec<_> = (0..400).map(|i| t0 + TimeDelta::minutes(10 * i)).collect();
        assert_eq!(RunConfig::default().reference_len(&ts).unwrap(), 288);
        let cfg = RunConfig {
            reference: ReferenceWindow::Count(400),
            ..Default::default()
        };
        assert!(cfg.reference_len(&ts).is_err());
        let cfg = RunConfig {
            reference: ReferenceWindow::Count(399),
            ..Default::default()
        };
        assert_eq!(cfg.reference_len(&ts).unwrap(), 399);
    }

    #[test]
    fn validation_names_fields() {
        let cfg = RunConfig {
            input: Some(InputSource::Dataset("/definitely/not/here".into())),
            alert: AlertConfig {
                window: 0,
                threshold: 2.0,
            },
            ..Default::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(
            msg.contains("input") && msg.contains("alert.window"),
            "{msg}"
        );
    }
}
