use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use bearingmap::embed::{mds_embed, tsne_embed, EmbedMethod};
use bearingmap::ingest::{
    load_dataset, synth_run_to_failure, write_dataset, LoadOptions, RecordingSet, SynthConfig,
    SYNTH_DECIMALS,
};
use bearingmap::preprocess::{preprocess_set, SpectrumVector, CSV_TIME_FORMAT};
use bearingmap::render::{render_map, render_rho_curve, Annotation, MapFigureSpec, MapPoint};
use bearingmap::rtdt::{build_reference_map_with, track_stream, write_tracked_csv, MapEngine};
use bearingmap::similarity::distance_matrix;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{InputSource, RunConfig};

pub fn synth(config: &RunConfig) -> anyhow::Result<()> {
    let synth = match &config.input {
        None => SynthConfig {
            seed: config.seed,
            ..SynthConfig::default()
        },
        Some(InputSource::Synth(s)) => s.clone(),
        Some(InputSource::Dataset(_)) => {
            bail!("config: synth needs a synth input, not a dataset path")
        }
    };
    let set = synth_run_to_failure(&synth).context("ingest")?;
    fs::create_dir_all(&config.out)
        .with_context(|| format!("io: creating {}", config.out.display()))?;
    write_dataset(&set, &config.out, SYNTH_DECIMALS).context("ingest")?;
    println!("wrote {} recordings to {}", set.len(), config.out.display());
    Ok(())
}

pub fn map(config: &RunConfig) -> anyhow::Result<()> {
    let (set, channel, digest) = load_input(config)?;
    let spectra = spectra(config, &set, channel)?;
    let d = distance_matrix(&spectra).context("similarity")?;
    let embedding = match config.method {
        EmbedMethod::Mds => mds_embed(&d),
        EmbedMethod::Tsne => tsne_embed(&d, &config.tsne),
    }
    .context("embed")?;

    let timestamps: Vec<_> = spectra.iter().map(SpectrumVector::timestamp).collect();
    let mut csv = Vec::new();
    embedding
        .write_csv(&mut csv, &timestamps)
        .context("embed")?;
    let figure = MapFigureSpec {
        title: format!("{} map of {} recordings", embedding.method, spectra.len()),
        points: embedding
            .points
            .iter()
            .zip(&timestamps)
            .map(|(p, &t)| MapPoint {
                x: p[0],
                y: p[1],
                timestamp: t,
            })
            .collect(),
        ..Default::default()
    };
    let svg = render_map(&figure).context("render")?;

    let manifest = json!({
        "command": "map",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "input_digest": digest,
        "recordings": set.len(),
        "dims": spectra[0].dims(),
        "diagnostics": embedding.diagnostics,
    });
    let out = prepare_out(config)?;
    write(out, &config.run_id, "embedding.csv", &csv)?;
    write(out, &config.run_id, "map.svg", svg.as_bytes())?;
    write(out, &config.run_id, "manifest.json", &pretty(&manifest)?)?;
    println!(
        "embedded {} recordings into {}",
        spectra.len(),
        out.display()
    );
    Ok(())
}

pub fn rtdt(config: &RunConfig) -> anyhow::Result<()> {
    let (set, channel, digest) = load_input(config)?;
    let spectra = spectra(config, &set, channel)?;
    let timestamps: Vec<_> = spectra.iter().map(SpectrumVector::timestamp).collect();
    let n_ref = config.reference_len(&timestamps)?;
    let engine = match config.method {
        EmbedMethod::Mds => MapEngine::Mds,
        EmbedMethod::Tsne => MapEngine::Tsne(config.tsne.clone()),
    };
    let map = build_reference_map_with(&spectra[..n_ref], &engine).context("rtdt")?;
    let (points, state) = track_stream(&map, &spectra[n_ref..], config.alert).context("rtdt")?;

    let mut reference_csv = Vec::new();
    map.write_csv(&mut reference_csv).context("rtdt")?;
    let mut tracked_csv = Vec::new();
    write_tracked_csv(&mut tracked_csv, &points).context("rtdt")?;
    let mut rho_csv = Vec::new();
    state.write_history_csv(&mut rho_csv).context("rtdt")?;

    let m = config.alert.window;
    let alerts: Vec<_> = state
        .alerts()
        .iter()
        .map(|a| {
            json!({
                "timestamp": a.timestamp.format(CSV_TIME_FORMAT).to_string(),
                "rho_avg": a.rho_avg,
                "block": a.block,
                "measurement_index": n_ref + (a.block + 1) * m - 1,
            })
        })
        .collect();

    let mut figure = MapFigureSpec {
        title: format!(
            "reference map ({}) and {} tracked recordings",
            map.method(),
            points.len()
        ),
        highlight: (0..n_ref).collect(),
        trajectory: true,
        ..Default::default()
    };
    figure.points = map
        .reference_points()
        .iter()
        .zip(&timestamps)
        .map(|(p, &t)| MapPoint {
            x: p[0],
            y: p[1],
            timestamp: t,
        })
        .chain(points.iter().map(|p| MapPoint {
            x: p.x2d[0],
            y: p.x2d[1],
            timestamp: p.timestamp,
        }))
        .collect();
    figure.annotations.push(Annotation {
        x: map.o2d()[0],
        y: map.o2d()[1],
        label: "O".into(),
    });
    figure.annotations.push(Annotation {
        x: map.g2d()[0],
        y: map.g2d()[1],
        label: "g".into(),
    });
    for a in state.alerts() {
        if let Some(p) = points.iter().find(|p| p.timestamp == a.timestamp) {
            figure.annotations.push(Annotation {
                x: p.x2d[0],
                y: p.x2d[1],
                label: "alert".into(),
            });
        }
    }
    let map_svg = render_map(&figure).context("render")?;
    let rho_svg = if state.history().is_empty() {
        None
    } else {
        Some(
            render_rho_curve(state.history(), config.alert.threshold, state.alerts())
                .context("render")?,
        )
    };

    let manifest = json!({
        "command": "rtdt",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "input_digest": digest,
        "reference": {
            "count": n_ref,
            "first": timestamps[0].format(CSV_TIME_FORMAT).to_string(),
            "last": timestamps[n_ref - 1].format(CSV_TIME_FORMAT).to_string(),
            "method": map.method(),
            "rotation_applied": map.rotation_applied(),
        },
        "tracked": points.len(),
        "infeasible_placements": points.iter().filter(|p| !p.feasible_geometry).count(),
        "rho_averages": state.history().len(),
        "alerts": alerts,
    });

    let out = prepare_out(config)?;
    write(out, &config.run_id, "reference.csv", &reference_csv)?;
    write(out, &config.run_id, "tracked.csv", &tracked_csv)?;
    write(out, &config.run_id, "rho.csv", &rho_csv)?;
    write(out, &config.run_id, "map.svg", map_svg.as_bytes())?;
    if let Some(svg) = rho_svg {
        write(out, &config.run_id, "rho.svg", svg.as_bytes())?;
    }
    write(out, &config.run_id, "manifest.json", &pretty(&manifest)?)?;
    match state.alerts().first() {
        Some(a) => println!(
            "tracked {} recordings against {} references; alert at {} (rho_avg {:.3})",
            points.len(),
            n_ref,
            a.timestamp.format(CSV_TIME_FORMAT),
            a.rho_avg
        ),
        None => println!(
            "tracked {} recordings against {} references; no alert",
            points.len(),
            n_ref
        ),
    }
    Ok(())
}

/// Loads the input and returns it with the index of the analysed channel
/// within the loaded set. Datasets on disk are loaded with that channel only.
fn load_input(config: &RunConfig) -> anyhow::Result<(RecordingSet, usize, String)> {
    let (set, channel) = match &config.input {
        None => bail!("config: no input; pass --input or set input in the config file"),
        Some(InputSource::Dataset(dir)) => {
            let options = LoadOptions {
                source_id: dir
                    .file_name()
                    .map_or("dataset".into(), |n| n.to_string_lossy().into_owned()),
                channels: Some(vec![config.channel]),
                ..Default::default()
            };
            (load_dataset(dir, &options).context("ingest")?.set, 0)
        }
        Some(InputSource::Synth(s)) => (synth_run_to_failure(s).context("ingest")?, config.channel),
    };
    let digest = digest(&set, channel);
    Ok((set, channel, digest))
}

/// SHA-256 over recording names and the analysed channel's sample bits,
/// independent of file formatting.
fn digest(set: &RecordingSet, channel: usize) -> String {
    let mut h = Sha256::new();
    for rec in set.recordings() {
        h.update(rec.file_name().as_bytes());
        h.update(rec.sample_rate().to_le_bytes());
        if let Some(samples) = rec.channel(channel) {
            h.update((samples.len() as u64).to_le_bytes());
            for v in samples {
                h.update(v.to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn spectra(
    config: &RunConfig,
    set: &RecordingSet,
    channel: usize,
) -> anyhow::Result<Vec<SpectrumVector>> {
    preprocess_set(set, channel, &config.preprocess).context("preprocess")
}

fn prepare_out(config: &RunConfig) -> anyhow::Result<&Path> {
    fs::create_dir_all(&config.out)
        .with_context(|| format!("io: creating {}", config.out.display()))?;
    Ok(&config.out)
}

fn write(dir: &Path, run_id: &str, suffix: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let path = dir.join(format!("{run_id}_{suffix}"));
    fs::write(&path, bytes).with_context(|| format!("io: writing {}", path.display()))
}

fn pretty(value: &serde_json::Value) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}
