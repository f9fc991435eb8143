//! Subcommand implementations, callable without going through the binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use semgrid_core::{Baseline, GridSequenceDataset, IouCounts, Split, NUM_CLASSES};
use semgrid_net::{
    checkpoint, evaluate, predict_samples, prepare_split, train_samples, EdConfig, EpochLog, Network, Tensor,
};
use semgrid_synth::{build_dataset, read_dataset, write_dataset, Manifest, SplitMode, MANIFEST_FILE};

use crate::config::{matching_baseline, write_text, ExperimentConfig};
use crate::error::{io_err, CliError, Result};
use crate::render;
use crate::report::{BenchEntry, BenchReport, ExperimentReport, Report, BENCH_NOTE, BENCH_SCHEMA};

/// Hex SHA-256 of a dataset's manifest file.
pub fn manifest_hash(dir: &Path) -> Result<String> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = std::fs::read(&path).map_err(io_err(&path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub struct Dataset {
    pub manifest: Manifest,
    pub data: GridSequenceDataset,
    pub hash: String,
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let (manifest, data) = read_dataset(dir)?;
    let hash = manifest_hash(dir)?;
    Ok(Dataset { manifest, data, hash })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthSummary {
    pub train: usize,
    pub validation: usize,
    pub manifest_sha256: String,
}

/// Simulates the configured scenes and writes the dataset to `out`.
pub fn synth(
    config: &ExperimentConfig,
    out: &Path,
    seed: Option<u64>,
    split: Option<SplitMode>,
) -> Result<SynthSummary> {
    let mut ds_config = config.dataset.clone();
    if let Some(s) = seed {
        ds_config.seed = s;
    }
    if let Some(s) = split {
        ds_config.split = s;
    }
    let total = ds_config.sampling.train_scenes + ds_config.sampling.validation_scenes;
    let data = build_dataset(&ds_config, |done, _| {
        if done % 50 == 0 || done == total {
            eprintln!("simulated {done}/{total} clips");
        }
    })?;
    write_dataset(out, &ds_config, &data)?;
    Ok(SynthSummary {
        train: data.train.len(),
        validation: data.validation.len(),
        manifest_sha256: manifest_hash(out)?,
    })
}

fn check_horizons(ds: &Dataset, horizons: &[usize]) -> Result<()> {
    for &h in horizons {
        if !ds.data.horizons.contains(&h) {
            return Err(CliError::Config(format!(
                "dataset has no targets for horizon {h} (has {:?})",
                ds.data.horizons
            )));
        }
    }
    Ok(())
}

fn tag(baseline: Baseline) -> String {
    baseline.name().to_uppercase()
}

/// Scores a baseline on the validation split for each horizon.
pub fn baseline_report(
    ds: &Dataset,
    baseline: Baseline,
    horizons: &[usize],
    render_dir: Option<(&Path, usize)>,
) -> Result<Report> {
    check_horizons(ds, horizons)?;
    let seqs = ds.data.split(Split::Validation);
    let translate = baseline != Baseline::Nt;
    let mut experiments = Vec::new();
    for &h in horizons {
        let mut counts = IouCounts::default();
        for (i, seq) in seqs.iter().enumerate() {
            let sample = seq.prepare(h, translate, 0)?;
            let pred = baseline.predict(seq, h)?;
            counts.add(&pred, &sample.target, Some(&sample.mask))?;
            if let Some((dir, _)) = render_dir.filter(|&(_, n)| i < n) {
                render::write(
                    &render::strip(&sample, &pred, None),
                    dir,
                    &format!("bl-{}_h{h}_{i:04}.png", baseline.name()),
                )?;
            }
        }
        let name = format!("BL-{}-h{h}", tag(baseline));
        experiments.push(ExperimentReport::from_counts(name, baseline.name(), h, translate, seqs.len(), &counts));
    }
    Ok(Report::new(ds.hash.clone(), experiments))
}

/// Effective training settings after command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct TrainOverrides {
    pub seed: Option<u64>,
    pub no_translation: bool,
    pub horizon: Option<usize>,
}

pub fn effective_config(config: &ExperimentConfig, o: &TrainOverrides) -> ExperimentConfig {
    let mut c = config.clone();
    if let Some(s) = o.seed {
        c.network.seed = s;
    }
    if o.no_translation {
        c.schedule.translate = false;
    }
    if let Some(h) = o.horizon {
        c.schedule.horizon = h;
    }
    c
}

fn ed_config(config: &ExperimentConfig, ds: &Dataset) -> Result<EdConfig> {
    let geo = ds.data.geometry;
    if geo.width != geo.height {
        return Err(CliError::Config(format!("network needs a square grid, got {}x{}", geo.width, geo.height)));
    }
    let c = config.network.ed_config(ds.data.in_channels(), NUM_CLASSES, geo.width);
    c.validate()?;
    Ok(c)
}

/// Trains a network on the dataset's training split, validating after each
/// epoch, and writes the checkpoint.
pub fn train(config: &ExperimentConfig, ds: &Dataset, checkpoint_path: &Path) -> Result<(Network, Vec<EpochLog>)> {
    let s = &config.schedule;
    check_horizons(ds, &[s.horizon])?;
    let train = prepare_split(&ds.data, Split::Train, s.horizon, s.translate, s.bottom_exclude)?;
    let validation = prepare_split(&ds.data, Split::Validation, s.horizon, s.translate, s.bottom_exclude)?;
    let mut net = Network::new(ed_config(config, ds)?)?;
    eprintln!(
        "training {} parameters on {} sequences ({} validation)",
        net.num_params(),
        train.len(),
        validation.len()
    );
    let start = Instant::now();
    let log = train_samples(&mut net, &train, &validation, s, config.network.seed.wrapping_add(1), |e, _| {
        eprintln!(
            "epoch {:>3} lr {:.0e} train {:.4} val {} mIoU {} ({:.0?})",
            e.epoch,
            e.learning_rate,
            e.train_loss,
            e.val_loss.map_or("-".into(), |v| format!("{v:.4}")),
            e.val_miou.map_or("-".into(), |v| format!("{v:.3}")),
            start.elapsed()
        );
    })?;
    checkpoint::save(&net, checkpoint_path)?;
    Ok((net, log))
}

pub fn load_network(path: &Path, ds: &Dataset) -> Result<Network> {
    let net = checkpoint::load::<f32>(path)?;
    let c = &net.config;
    if c.in_channels != ds.data.in_channels() || c.grid_size != ds.data.geometry.width || c.out_channels != NUM_CLASSES
    {
        return Err(CliError::Config(format!(
            "checkpoint expects {} input channels on a {} grid, dataset provides {} on {}",
            c.in_channels,
            c.grid_size,
            ds.data.in_channels(),
            ds.data.geometry.width
        )));
    }
    Ok(net)
}

pub struct EvalOptions<'a> {
    pub horizons: Vec<usize>,
    pub translate: bool,
    pub baseline: Option<Baseline>,
    pub batch_size: usize,
    pub render: Option<(&'a Path, usize)>,
}

/// Scores a trained network next to its baseline for every horizon.
pub fn eval(net: &Network, ds: &Dataset, opts: &EvalOptions) -> Result<Report> {
    check_horizons(ds, &opts.horizons)?;
    let baseline = opts.baseline.unwrap_or_else(|| matching_baseline(ds.manifest.config.split, opts.translate));
    let bl = baseline_report(ds, baseline, &opts.horizons, opts.render)?;
    let mut experiments = Vec::new();
    for (&h, bl_entry) in opts.horizons.iter().zip(bl.experiments) {
        let samples = prepare_split(&ds.data, Split::Validation, h, opts.translate, 0)?;
        let e = evaluate(net, &samples, opts.batch_size)?;
        let mut entry = ExperimentReport::from_counts(
            format!("ED-{}-h{h}", tag(baseline)),
            "ed",
            h,
            opts.translate,
            samples.len(),
            &e.counts,
        );
        entry.loss = Some(e.loss);
        experiments.push(entry);
        experiments.push(bl_entry);
        if let Some((dir, n)) = opts.render {
            let n = n.min(samples.len());
            let preds = predict_samples(net, &samples[..n], opts.batch_size)?;
            for (i, (s, p)) in samples.iter().zip(&preds).enumerate() {
                let img = render::strip(s, &p.argmax(s.target.timestamp), Some(p));
                render::write(&img, dir, &format!("ed_h{h}_{i:04}.png"))?;
            }
        }
    }
    Ok(Report::new(ds.hash.clone(), experiments))
}

pub fn write_report(report: &Report, path: &Path) -> Result<()> {
    write_text(path, &report.to_json())
}

/// Forward-pass timing at batch size 1: `iterations` runs of `steps`
/// passes each; mean and deviation are over iterations of per-pass time.
pub fn bench(configs: &[EdConfig], iterations: usize, steps: usize) -> Result<BenchReport> {
    if iterations == 0 || steps == 0 {
        return Err(CliError::Config("iterations and steps must be positive".into()));
    }
    let mut entries = Vec::new();
    for &config in configs {
        let net = Network::new(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let g = config.grid_size;
        let mut x = Tensor::<f32>::zeros(1, config.in_channels, g, g);
        for cell in 0..g * g {
            for grid in 0..config.in_channels / NUM_CLASSES {
                let k = rng.random_range(0..NUM_CLASSES);
                x.data[(grid * NUM_CLASSES + k) * g * g + cell] = 1.0;
            }
        }
        net.predict(&x)?;
        let times: Vec<f64> = (0..iterations)
            .map(|_| {
                let t = Instant::now();
                for _ in 0..steps {
                    std::hint::black_box(net.predict(&x).expect("shape checked above"));
                }
                t.elapsed().as_secs_f64() * 1e3 / steps as f64
            })
            .collect();
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / times.len() as f64;
        entries.push(BenchEntry {
            depth: config.depth,
            base_features: config.base_features,
            grid_size: g,
            in_channels: config.in_channels,
            parameters: net.num_params(),
            iterations,
            steps_per_iteration: steps,
            mean_ms: mean,
            std_ms: var.sqrt(),
        });
    }
    Ok(BenchReport { schema: BENCH_SCHEMA.into(), note: BENCH_NOTE.into(), configs: entries })
}

pub fn default_log_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("log.json")
}
