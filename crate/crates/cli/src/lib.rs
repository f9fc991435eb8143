//! Library side of the `semgrid` command: experiment configs, subcommands
//! and report formats.

pub mod commands;
pub mod config;
pub mod error;
pub mod render;
pub mod report;

pub use config::{EvalSpec, ExperimentConfig, NetworkSpec};
pub use error::{CliError, Result};
pub use report::{BenchReport, ExperimentReport, Report};

/// Directory holding the preset experiment configs.
pub const PRESET_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
/// JSON schema of metric reports.
pub const REPORT_SCHEMA_FILE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/schema/report.schema.json");
