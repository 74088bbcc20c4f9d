use std::f64::consts::TAU;

use bearingmap::ingest::*;
use bearingmap::preprocess::*;
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Positive-bin magnitudes by the defining sum, zero padding to `n`.
fn direct_dft(x: &[f64], n: usize) -> Vec<f64> {
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|m| (TAU * m as f64 / n as f64).sin_cos())
        .map(|(s, c)| (c, s))
        .unzip();
    (0..n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &v) in x.iter().enumerate() {
                let m = (k * j) % n;
                re += v * cos[m];
                im -= v * sin[m];
            }
            re.hypot(im)
        })
        .collect()
}

#[test]
fn fft_matches_direct_sum_and_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let len = rng.gen_range(64..=1024);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let config = PreprocessConfig::for_segment(len);
        let n = config.transform_len;
        let fast = dft_magnitude(&x, &config).unwrap();
        let slow = direct_dft(&x, n);
        let scale = slow.iter().cloned().fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * scale);
        }

        let nyquist: f64 = x
            .iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 0 { *v } else { -*v })
            .sum();
        let spectral = (fast[0].powi(2)
            + nyquist.powi(2)
            + 2.0 * fast[1..].iter().map(|m| m * m).sum::<f64>())
            / n as f64;
        let energy: f64 = x.iter().map(|v| v * v).sum();
        assert!((spectral - energy).abs() <= 1e-6 * energy);
    }
}

#[test]
fn ims_shaped_recording_gives_128_dims() {
    let ts = NaiveDate::from_ymd_opt(2004, 2, 12)
        .unwrap()
        .and_hms_opt(10, 32, 39)
        .unwrap();
    let samples: Vec<f64> = (0..IMS_SEGMENT_LEN)
        .map(|k| (TAU * 1000.0 * k as f64 / IMS_SAMPLE_RATE).sin())
        .collect();
    let rec = RawRecording::new(ts, IMS_SAMPLE_RATE, vec![samples], "fixture").unwrap();
    let v = preprocess_recording(&rec, 0, &PreprocessConfig::default()).unwrap();
    assert_eq!(v.dims(), 128);
    assert_eq!(v.bin_width(), 78.125);
    // 1 kHz sits in dimension 12 (937.5 to 1015.625 Hz).
    let peak = (0..128)
        .max_by(|&a, &b| v.values()[a].total_cmp(&v.values()[b]))
        .unwrap();
    assert_eq!(peak, 12);
}

#[test]
fn synthetic_fault_band_grows_with_stage() {
    let cfg = SynthConfig {
        n_recordings: 40,
        stage_boundaries: vec![10, 20, 30],
        ..Default::default()
    };
    let set = synth_run_to_failure(&cfg).unwrap();
    let spectra = preprocess_set(&set, 0, &PreprocessConfig::default()).unwrap();
    let bin = (cfg.fault_freq / spectra[0].bin_width()) as usize;
    let stage_mean = |s: usize| {
        spectra[s * 10..(s + 1) * 10]
            .iter()
            .map(|v| v.values()[bin])
            .sum::<f64>()
            / 10.0
    };
    let means: Vec<f64> = (0..4).map(stage_mean).collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
    // The shaft line dominates the healthy spectrum.
    let healthy = &spectra[0];
    let top = (0..healthy.dims())
        .max_by(|&a, &b| healthy.values()[a].total_cmp(&healthy.values()[b]))
        .unwrap();
    assert_eq!(top, 0);
}

#[test]
fn dataset_round_trips_through_disk() {
    let cfg = SynthConfig {
        n_recordings: 6,
        segment_len: 1024,
        n_channels: 2,
        stage_boundaries: vec![2, 3, 5],
        seed: 17,
        ..Default::default()
    };
    let set = synth_run_to_failure(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&set, dir.path(), SYNTH_DECIMALS).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

    let loaded = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
    assert_eq!(loaded.rejects, vec!["notes.txt".to_string()]);
    assert_eq!(loaded.set.len(), 6);
    for (a, b) in set.recordings().iter().zip(loaded.set.recordings()) {
        assert_eq!(a.timestamp(), b.timestamp());
        assert_eq!(a.channels(), b.channels());
        assert_eq!(b.sample_rate(), cfg.sample_rate);
    }

    let config = PreprocessConfig::for_segment(1024);
    let spectra = preprocess_set(&loaded.set, 1, &config).unwrap();
    let mut csv = Vec::new();
    write_spectra_csv(&mut csv, &spectra).unwrap();
    let back = read_spectra_csv(csv.as_slice()).unwrap();
    assert_eq!(back.len(), spectra.len());
    for (a, b) in spectra.iter().zip(&back) {
        assert_eq!(a.timestamp(), b.timestamp());
        assert_eq!(a.values(), b.values());
    }
}
