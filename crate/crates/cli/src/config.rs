//! Experiment configuration: one TOML file per experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use semgrid_core::Baseline;
use semgrid_net::{EdConfig, Schedule};
use semgrid_synth::{DatasetConfig, SplitMode};

use crate::error::{io_err, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub depth: usize,
    pub base_features: usize,
    pub dropout_rate: f64,
    /// Seeds initialization, shuffling and dropout.
    pub seed: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self { depth: 2, base_features: 16, dropout_rate: 0.5, seed: 0 }
    }
}

impl NetworkSpec {
    pub fn ed_config(&self, in_channels: usize, out_channels: usize, grid_size: usize) -> EdConfig {
        EdConfig {
            depth: self.depth,
            base_features: self.base_features,
            in_channels,
            out_channels,
            grid_size,
            dropout_rate: self.dropout_rate,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    /// Horizons evaluated by `eval`; each yields one report entry.
    pub horizons: Vec<usize>,
    /// Baseline compared against; defaults to the one matching the dataset.
    pub baseline: Option<String>,
    /// Sequences rendered when `--render` is given.
    pub render_count: usize,
    pub batch_size: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self { horizons: vec![1], baseline: None, render_count: 8, batch_size: 32 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    pub network: NetworkSpec,
    pub schedule: Schedule,
    pub eval: EvalSpec,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.schedule.validate()?;
        if self.eval.horizons.is_empty() || self.eval.horizons.contains(&0) {
            return Err(CliError::Config("eval.horizons must be non-empty and positive".into()));
        }
        if let Some(b) = &self.eval.baseline {
            Baseline::parse(b).map_err(|e| CliError::Config(e.to_string()))?;
        }
        let grid = self.dataset.grid.cells;
        self.network.ed_config(1, 1, grid).validate()?;
        Ok(())
    }

    /// Baseline associated with the experiment: the configured one, else
    /// the sensor overlay for split datasets, the no-translation baseline
    /// when translation is off, and the egomotion baseline otherwise.
    pub fn baseline(&self, split: SplitMode, translate: bool) -> Result<Baseline> {
        match &self.eval.baseline {
            Some(b) => Baseline::parse(b).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(matching_baseline(split, translate)),
        }
    }
}

pub fn matching_baseline(split: SplitMode, translate: bool) -> Baseline {
    if !translate {
        Baseline::Nt
    } else if split != SplitMode::None {
        Baseline::Sp
    } else {
        Baseline::Dc
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}
