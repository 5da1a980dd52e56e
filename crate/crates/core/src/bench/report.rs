//! Result records, accuracy-curve smoothing and report files.
//!
//! A report is a JSON-lines file with one [`AccuracyRecord`] per line and a
//! sibling `.plot` file holding whitespace-separated `K accuracy` blocks
//! (raw, then smoothed) for every record, separated by blank lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Method;
use crate::error::{Error, Result};

/// Width of the forward smoothing window.
pub const SMOOTH_WINDOW: usize = 5;

/// Outcome of one train/test repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    /// Test accuracy at the best K of the K grid.
    pub accuracy: f64,
    pub k: usize,
    /// Selected hyperparameters; absent for the Euclidean baseline.
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    /// Cross-validated accuracy of the selected hyperparameters.
    pub cv_score: Option<f64>,
    /// Test accuracy for each entry of the record's K grid.
    pub acc_by_k: Vec<f64>,
    /// Test accuracy for K = 1, 2, ..., curve length.
    pub curve: Vec<f64>,
    pub final_objective: Option<f64>,
    pub nca_objective: Option<f64>,
    pub pnca_objective: Option<f64>,
    pub train_seconds: f64,
}

/// Aggregated results of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub method: Method,
    pub dataset: String,
    /// Most frequently selected values across repetitions (first on ties).
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub k: usize,
    pub k_grid: Vec<usize>,
    /// Per-repetition best-K accuracies.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single repetition).
    pub std: f64,
    pub wall_time_seconds: f64,
    pub repetitions: Vec<RepetitionResult>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn modal<T: PartialEq + Copy>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let values: Vec<T> = values.into_iter().collect();
    let mut best: Option<(T, usize)> = None;
    for &v in &values {
        let count = values.iter().filter(|&&w| w == v).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((v, count));
        }
    }
    best.map(|(v, _)| v)
}

impl AccuracyRecord {
    pub fn from_repetitions(
        method: Method,
        dataset: &str,
        k_grid: Vec<usize>,
        repetitions: Vec<RepetitionResult>,
        wall_time_seconds: f64,
    ) -> Self {
        let accuracies: Vec<f64> = repetitions.iter().map(|r| r.accuracy).collect();
        let (mean, std) = mean_std(&accuracies);
        AccuracyRecord {
            method,
            dataset: dataset.to_string(),
            alpha: modal(repetitions.iter().filter_map(|r| r.alpha)),
            gamma: modal(repetitions.iter().filter_map(|r| r.gamma)),
            k: modal(repetitions.iter().map(|r| r.k)).unwrap_or(1),
            k_grid,
            accuracies,
            mean,
            std,
            wall_time_seconds,
            repetitions,
        }
    }

    /// Mean test accuracy over repetitions for K = 1, 2, ...
    pub fn mean_curve(&self) -> BTreeMap<usize, f64> {
        let len = self.repetitions.iter().map(|r| r.curve.len()).min().unwrap_or(0);
        let n = self.repetitions.len() as f64;
        (0..len)
            .map(|k| (k + 1, self.repetitions.iter().map(|r| r.curve[k]).sum::<f64>() / n))
            .collect()
    }
}

/// `r̂(K) = (r(K+1) + ... + r(K+5)) / 5` for every K ≥ 0 whose whole window
/// is present in `acc_by_k`; other K are left out.
pub fn smooth_over_k(acc_by_k: &BTreeMap<usize, f64>) -> BTreeMap<usize, f64> {
    let Some(&max_k) = acc_by_k.keys().next_back() else {
        return BTreeMap::new();
    };
    (0..max_k)
        .filter_map(|k| {
            let window: Option<Vec<f64>> = (k + 1..=k + SMOOTH_WINDOW).map(|j| acc_by_k.get(&j).copied()).collect();
            window.map(|w| (k, w.iter().sum::<f64>() / SMOOTH_WINDOW as f64))
        })
        .collect()
}

/// The `.plot` file written next to a report.
pub fn plot_path(report: &Path) -> PathBuf {
    report.with_extension("plot")
}

/// Writes `records` as JSON lines to `path` and their accuracy curves to
/// [`plot_path`]`(path)`.
pub fn emit_report(records: &[AccuracyRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut jsonl = String::new();
    for r in records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    fs::write(path, jsonl).map_err(|e| Error::io(path, e))?;

    let mut plot = String::new();
    for r in records {
        let raw = r.mean_curve();
        for (kind, curve) in [("raw", &raw), ("smoothed", &smooth_over_k(&raw))] {
            let _ = writeln!(plot, "# {} {} {}", r.dataset, r.method.name(), kind);
            for (k, acc) in curve {
                let _ = writeln!(plot, "{k} {acc}");
            }
            plot.push_str("\n\n");
        }
    }
    let pp = plot_path(path);
    fs::write(&pp, plot).map_err(|e| Error::io(pp, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<AccuracyRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Human-readable table of the records.
pub fn summary_table(records: &[AccuracyRecord]) -> String {
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v}"));
    let mut out = format!(
        "{:<12} {:<20} {:>16} {:>10} {:>10} {:>4} {:>5} {:>9}\n",
        "dataset", "method", "accuracy (%)", "alpha", "gamma", "K", "reps", "time (s)"
    );
    for r in records {
        let _ = writeln!(
            out,
            "{:<12} {:<20} {:>16} {:>10} {:>10} {:>4} {:>5} {:>9.2}",
            r.dataset,
            r.method.name(),
            format!("{:.2} ± {:.2}", 100.0 * r.mean, 100.0 * r.std),
            fmt_opt(r.alpha),
            fmt_opt(r.gamma),
            r.k,
            r.repetitions.len(),
            r.wall_time_seconds
        );
    }
    out
}
