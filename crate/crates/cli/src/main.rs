use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semgrid_core::Baseline;
use semgrid_net::EdConfig;
use semgrid_synth::SplitMode;

use semgrid_cli::commands::{self, EvalOptions, TrainOverrides};
use semgrid_cli::config::write_text;
use semgrid_cli::{CliError, ExperimentConfig, Report, Result};

#[derive(Parser)]
#[command(name = "semgrid", version, about = "Semantic grid synthesis, fusion and prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scenes and write a grid-sequence dataset.
    Synth(SynthArgs),
    /// Score a model-driven baseline on a dataset's validation split.
    Baseline(BaselineArgs),
    /// Train the fusion network.
    Train(TrainArgs),
    /// Score a trained network next to its baseline.
    Eval(EvalArgs),
    /// Time forward passes.
    Bench(BenchArgs),
    /// Print reports as tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split: Option<SplitMode>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// nt, dc or sp.
    #[arg(long, default_value = "dc")]
    baseline: String,
    #[arg(long = "horizon")]
    horizons: Vec<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for PNG strips.
    #[arg(long)]
    render: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    render_count: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_translation: bool,
    #[arg(long)]
    horizon: Option<usize>,
    /// Training log; defaults next to the checkpoint.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Supplies default horizons, baseline and render count.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "horizon")]
    horizons: Vec<usize>,
    #[arg(long)]
    no_translation: bool,
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    render: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Supplies depth, features and grid size.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base feature counts to compare; defaults to the config's.
    #[arg(long = "features")]
    features: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    files: Vec<PathBuf>,
}

fn parse_baseline(s: &str) -> Result<Baseline> {
    Baseline::parse(s).map_err(|e| CliError::Config(e.to_string()))
}

fn emit(report: &Report, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => commands::write_report(report, p)?,
        None => print!("{}", report.to_json()),
    }
    eprint!("{}", report.table());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let config = ExperimentConfig::load(&a.config)?;
            let s = commands::synth(&config, &a.dataset, a.seed, a.split)?;
            println!("train {} validation {} manifest sha256 {}", s.train, s.validation, s.manifest_sha256);
        }
        Command::Baseline(a) => {
            let ds = commands::load_dataset(&a.dataset)?;
            let horizons = if a.horizons.is_empty() { ds.data.horizons.clone() } else { a.horizons };
            let render = a.render.as_deref().map(|d| (d, a.render_count));
            let report = commands::baseline_report(&ds, parse_baseline(&a.baseline)?, &horizons, render)?;
            emit(&report, a.report.as_deref())?;
        }
        Command::Train(a) => {
            let base = ExperimentConfig::load(&a.config)?;
            let overrides = TrainOverrides { seed: a.seed, no_translation: a.no_translation, horizon: a.horizon };
            let config = commands::effective_config(&base, &overrides);
            let ds = commands::load_dataset(&a.dataset)?;
            let (_, log) = commands::train(&config, &ds, &a.checkpoint)?;
            let log_path = a.log.unwrap_or_else(|| commands::default_log_path(&a.checkpoint));
            let text = serde_json::to_string_pretty(&log).expect("log serializes") + "\n";
            write_text(&log_path, &text)?;
        }
        Command::Eval(a) => {
            let config = a.config.as_deref().map(ExperimentConfig::load).transpose()?.unwrap_or_default();
            let ds = commands::load_dataset(&a.dataset)?;
            let net = commands::load_network(&a.checkpoint, &ds)?;
            let horizons = if a.horizons.is_empty() { config.eval.horizons.clone() } else { a.horizons };
            let baseline = match a.baseline.as_deref().or(config.eval.baseline.as_deref()) {
                Some(b) => Some(parse_baseline(b)?),
                None => None,
            };
            let opts = EvalOptions {
                horizons,
                translate: !a.no_translation && config.schedule.translate,
                baseline,
                batch_size: config.eval.batch_size,
                render: a.render.as_deref().map(|d| (d, config.eval.render_count)),
            };
            emit(&commands::eval(&net, &ds, &opts)?, a.report.as_deref())?;
        }
        Command::Bench(a) => {
            let config = a.config.as_deref().map(ExperimentConfig::load).transpose()?.unwrap_or_default();
            let features = if a.features.is_empty() { vec![config.network.base_features] } else { a.features };
            let in_channels = config.dataset.split.n_sensors() * config.dataset.sampling.n * semgrid_core::NUM_CLASSES;
            let configs: Vec<EdConfig> = features
                .iter()
                .map(|&f| EdConfig {
                    base_features: f,
                    seed: a.seed,
                    ..config.network.ed_config(in_channels, semgrid_core::NUM_CLASSES, config.dataset.grid.cells)
                })
                .collect();
            let report = commands::bench(&configs, a.iterations, a.steps)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            match a.report {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
            eprintln!("{}", report.note);
        }
        Command::Report(a) => {
            for f in &a.files {
                let text = std::fs::read_to_string(f).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?;
                let report: Report =
                    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?;
                println!("{}\n{}", f.display(), report.table());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
