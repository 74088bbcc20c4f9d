//! `bearingmap` command-line driver.
//!
//! ```text
//! bearingmap synth --out data/ --seed 3
//! bearingmap map   --input data/ --out runs/ --method tsne --perplexity 30
//! bearingmap rtdt  --input data/ --out runs/ --reference-count 288
//! ```
//!
//! Every subcommand accepts `--config run.json`; flags override file values.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bearingmap::embed::EmbedMethod;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "bearingmap",
    version,
    about = "Full-spectrum bearing maps and real-time degradation tracking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded run-to-failure dataset.
    Synth(Overrides),
    /// Embed a whole campaign into one offline map.
    Map(Overrides),
    /// Build a reference map from early data and track the rest.
    Rtdt(Overrides),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<EmbedMethod>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    /// Number of leading recordings in the reference set.
    #[arg(long)]
    pub reference_count: Option<usize>,
    /// Number of ρ values per average.
    #[arg(long)]
    pub m_window: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub channel: Option<usize>,
    /// Prefix of every output file.
    #[arg(long)]
    pub run_id: Option<String>,
}

fn parse_method(s: &str) -> Result<EmbedMethod, String> {
    s.parse().map_err(|e: bearingmap::Error| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    type Handler = fn(&RunConfig) -> anyhow::Result<()>;
    let (flags, handler): (&Overrides, Handler) = match &cli.command {
        Command::Synth(f) => (f, commands::synth),
        Command::Map(f) => (f, commands::map),
        Command::Rtdt(f) => (f, commands::rtdt),
    };
    let base = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    handler(&base.resolve(flags)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
