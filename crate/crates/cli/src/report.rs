//! JSON metric reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use semgrid_core::{category_miou, mean_iou, Category, IouCounts, SemanticClass};

pub const REPORT_SCHEMA: &str = "semgrid-report/1";
pub const POOLING_NOTE: &str = "IoU is pooled over every scored cell of every evaluated sequence \
(global intersection over global union); masked cells are excluded. Category values are unweighted \
means of the member classes present.";

/// Scores of one method on one evaluation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// e.g. `ED-DC-h1`, `BL-DC-h1`.
    pub name: String,
    /// `ed` or a baseline name (`nt`, `dc`, `sp`).
    pub method: String,
    pub horizon: usize,
    pub translate: bool,
    pub sequences: usize,
    /// Per-class IoU keyed by class name; `null` when a class never occurs.
    pub classes: BTreeMap<String, Option<f64>>,
    pub categories: BTreeMap<String, Option<f64>>,
    pub mean_iou: Option<f64>,
    pub intersection: Vec<u64>,
    pub union: Vec<u64>,
    /// Mean masked cross-entropy, for network predictions.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub loss: Option<f64>,
}

impl ExperimentReport {
    pub fn from_counts(
        name: String,
        method: &str,
        horizon: usize,
        translate: bool,
        sequences: usize,
        counts: &IouCounts,
    ) -> Self {
        let per_class = counts.per_class();
        let cats = category_miou(&per_class);
        Self {
            name,
            method: method.to_string(),
            horizon,
            translate,
            sequences,
            classes: SemanticClass::ALL.iter().map(|c| (c.name().to_string(), per_class[c.index()])).collect(),
            categories: Category::ALL.iter().map(|c| (c.name().to_string(), cats[c.index()])).collect(),
            mean_iou: mean_iou(&per_class),
            intersection: counts.intersection.to_vec(),
            union: counts.union.to_vec(),
            loss: None,
        }
    }

    pub fn category(&self, category: Category) -> Option<f64> {
        self.categories.get(category.name()).copied().flatten()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub note: String,
    /// SHA-256 of the dataset manifest the report was computed on.
    pub dataset: String,
    pub split: String,
    pub experiments: Vec<ExperimentReport>,
}

impl Report {
    pub fn new(dataset: String, experiments: Vec<ExperimentReport>) -> Self {
        Self {
            schema: REPORT_SCHEMA.into(),
            note: POOLING_NOTE.into(),
            dataset,
            split: "validation".into(),
            experiments,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn experiment(&self, name: &str) -> Option<&ExperimentReport> {
        self.experiments.iter().find(|e| e.name == name)
    }

    /// Plain-text table: one row per experiment, one column per category
    /// plus mIoU.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut out = format!("{:<16}", "experiment");
        for c in Category::ALL {
            out += &format!(" {:>13}", c.name());
        }
        out += &format!(" {:>8}\n", "mIoU");
        for e in &self.experiments {
            out += &format!("{:<16}", e.name);
            for c in Category::ALL {
                out += &format!(" {:>13}", fmt(e.category(c)));
            }
            out += &format!(" {:>8}\n", fmt(e.mean_iou));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub note: String,
    pub configs: Vec<BenchEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub depth: usize,
    pub base_features: usize,
    pub grid_size: usize,
    pub in_channels: usize,
    pub parameters: usize,
    pub iterations: usize,
    pub steps_per_iteration: usize,
    /// Mean and standard deviation over iterations of the per-step time.
    pub mean_ms: f64,
    pub std_ms: f64,
}

pub const BENCH_SCHEMA: &str = "semgrid-bench/1";
pub const BENCH_NOTE: &str = "Single-threaded CPU forward passes at batch size 1; \
not comparable with GPU runtimes.";
