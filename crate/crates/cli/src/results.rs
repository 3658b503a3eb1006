//! Result records (append-only JSON lines) and the aggregated report.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub dev_acc: f64,
    pub test_acc: f64,
    pub best_epoch: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_s: f64,
    pub train_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub variant: String,
    pub fingerprint: String,
    pub base_seed: u64,
    pub runs: Vec<RunRecord>,
    pub dev_mean: f64,
    pub dev_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    /// Whether the raw feature matrix was opened.
    pub features_loaded: bool,
    pub timings: Timings,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunResult {
    pub fn new(
        dataset: &str,
        variant: &str,
        fingerprint: String,
        base_seed: u64,
        runs: Vec<RunRecord>,
        features_loaded: bool,
        timings: Timings,
    ) -> Self {
        let dev: Vec<f64> = runs.iter().map(|r| r.dev_acc).collect();
        let test: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
        let (dev_mean, dev_std) = mean_std(&dev);
        let (test_mean, test_std) = mean_std(&test);
        Self {
            dataset: dataset.to_string(),
            variant: variant.to_string(),
            fingerprint,
            base_seed,
            runs,
            dev_mean,
            dev_std,
            test_mean,
            test_std,
            features_loaded,
            timings,
        }
    }
}

pub fn append_result(path: &Path, result: &RunResult) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut line = serde_json::to_string(result).expect("records serialize");
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn read_results(path: &Path) -> CliResult<Vec<RunResult>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| {
                CliError::Core(ssagcn_core::Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub variant: String,
    pub runs: usize,
    pub dev_mean: f64,
    pub dev_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub fingerprint: String,
}

/// One row per (dataset, variant); a later record replaces an earlier one
/// in place, so row order follows first appearance.
pub fn aggregate(records: &[RunResult]) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = Vec::new();
    for r in records {
        let row = ReportRow {
            dataset: r.dataset.clone(),
            variant: r.variant.clone(),
            runs: r.runs.len(),
            dev_mean: r.dev_mean,
            dev_std: r.dev_std,
            test_mean: r.test_mean,
            test_std: r.test_std,
            fingerprint: r.fingerprint.clone(),
        };
        match rows
            .iter_mut()
            .find(|x| x.dataset == row.dataset && x.variant == row.variant)
        {
            Some(slot) => *slot = row,
            None => rows.push(row),
        }
    }
    rows
}

/// Fixed-width table, accuracies in percent.
pub fn render_table(rows: &[ReportRow]) -> String {
    let dw = rows.iter().map(|r| r.dataset.len()).max().unwrap_or(0).max(7);
    let vw = rows.iter().map(|r| r.variant.len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<dw$}  {:<vw$}  {:>4}  {:>15}  {:>15}",
        "dataset", "variant", "runs", "dev % (±sd)", "test % (±sd)"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<dw$}  {:<vw$}  {:>4}  {:>15}  {:>15}",
            r.dataset,
            r.variant,
            r.runs,
            format!("{:.2} ± {:.2}", 100.0 * r.dev_mean, 100.0 * r.dev_std),
            format!("{:.2} ± {:.2}", 100.0 * r.test_mean, 100.0 * r.test_std),
        );
    }
    out
}

pub fn render_json(rows: &[ReportRow]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
    s.push('\n');
    s
}
