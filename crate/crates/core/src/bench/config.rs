//! Experiment configuration files.
//!
//! ```toml
//! [registry.iris]
//! path = "../data/iris.csv"          # relative to this file
//! format = { kind = "delimited" }    # or { kind = "sparse_index_value" }
//!
//! [[experiment]]
//! dataset = "iris"
//! method = "ann_plus"
//! alpha_grid = [0.5, 2.0]
//! gamma_grid = [0.25, 1.0]
//! repetitions = 10
//! ```
//!
//! Omitted grids fall back to the full protocol grids.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Format;
use crate::error::{Error, Result};
use crate::objective::LossFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Positive α, every same-class sample as a similar neighbor.
    AnnPlus,
    /// Negative α, the `k0` nearest same-class samples as similar neighbors.
    AnnMinus,
    /// ANN⁺ with the identity loss; also reports NCA and PNCA objective values.
    PncaReport,
    /// No training; K-NN under the identity metric.
    EuclideanBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AnnPlus => "ann_plus",
            Method::AnnMinus => "ann_minus",
            Method::PncaReport => "pnca_report",
            Method::EuclideanBaseline => "euclidean_baseline",
        }
    }

    pub fn trains(self) -> bool {
        self != Method::EuclideanBaseline
    }

    /// Sign applied to the magnitudes in the α grid.
    pub fn alpha_sign(self) -> f64 {
        if self == Method::AnnMinus {
            -1.0
        } else {
            1.0
        }
    }
}

/// `2^-9, 2^-8, ..., 2^10`.
pub fn default_scale_grid() -> Vec<f64> {
    (-9..=10).map(|e| 2f64.powi(e)).collect()
}

/// `1, 4, 7, ..., 46`.
pub fn default_k_grid() -> Vec<usize> {
    (1..=46).step_by(3).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

/// One fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub path: PathBuf,
    pub format: Format,
    pub method: Method,
    /// Magnitudes; the sign comes from the method.
    pub alpha_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub repetitions: usize,
    pub split_fraction: f64,
    pub cv_folds: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub eta0: f64,
    pub loss: LossFn,
    /// Similar-set size for [`Method::AnnMinus`].
    pub k0: usize,
    /// Accuracy curves are recorded for every K in `1..=curve_max_k`.
    pub curve_max_k: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    dataset: String,
    method: Method,
    alpha_grid: Option<Vec<f64>>,
    gamma_grid: Option<Vec<f64>>,
    k_grid: Option<Vec<usize>>,
    #[serde(default = "one")]
    repetitions: usize,
    #[serde(default = "seventy")]
    split_fraction: f64,
    #[serde(default = "five")]
    cv_folds: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "hundred")]
    max_iters: usize,
    #[serde(default = "eta0")]
    eta0: f64,
    #[serde(default)]
    loss: LossFn,
    #[serde(default = "ten")]
    k0: usize,
    curve_max_k: Option<usize>,
}

fn one() -> usize {
    1
}
fn five() -> usize {
    5
}
fn ten() -> usize {
    10
}
fn hundred() -> usize {
    100
}
fn seventy() -> f64 {
    0.7
}
fn eta0() -> f64 {
    1e-3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    registry: BTreeMap<String, DatasetEntry>,
    #[serde(default)]
    experiment: Vec<RawExperiment>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{} / {}: {m}", self.dataset, self.method.name())));
        if self.alpha_grid.is_empty() || self.gamma_grid.is_empty() || self.k_grid.is_empty() {
            return bad("grids must be non-empty".into());
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(a.is_finite() && **a != 0.0)) {
            return bad(format!("alpha grid entry {a} must be finite and nonzero"));
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return bad(format!("gamma grid entry {g} must be > 0"));
        }
        if self.k_grid.contains(&0) {
            return bad("K grid entries must be ≥ 1".into());
        }
        if self.repetitions < 1 {
            return bad("repetitions must be ≥ 1".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            ));
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be ≥ 2".into());
        }
        if self.max_iters < 1 || !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad("max_iters must be ≥ 1 and eta0 > 0".into());
        }
        if self.k0 < 1 {
            return bad("k0 must be ≥ 1".into());
        }
        if self.curve_max_k < 1 {
            return bad("curve_max_k must be ≥ 1".into());
        }
        self.loss.validate()
    }

    /// Signed α values in grid order.
    pub fn signed_alphas(&self) -> Vec<f64> {
        self.alpha_grid
            .iter()
            .map(|a| a.abs() * self.method.alpha_sign())
            .collect()
    }
}

/// Parses a config; relative dataset paths are resolved against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<Vec<ExperimentConfig>> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    raw.experiment
        .into_iter()
        .map(|e| {
            let entry = raw
                .registry
                .get(&e.dataset)
                .ok_or_else(|| Error::Config(format!("unknown dataset '{}'", e.dataset)))?;
            let path = if entry.path.is_absolute() {
                entry.path.clone()
            } else {
                base_dir.join(&entry.path)
            };
            let k_grid = e.k_grid.unwrap_or_else(default_k_grid);
            let curve_max_k = e
                .curve_max_k
                .unwrap_or_else(|| k_grid.iter().copied().max().unwrap_or(1) + 5);
            let cfg = ExperimentConfig {
                dataset: e.dataset,
                path,
                format: entry.format.clone(),
                method: e.method,
                alpha_grid: e.alpha_grid.unwrap_or_else(default_scale_grid),
                gamma_grid: e.gamma_grid.unwrap_or_else(default_scale_grid),
                k_grid,
                repetitions: e.repetitions,
                split_fraction: e.split_fraction,
                cv_folds: e.cv_folds,
                seed: e.seed,
                max_iters: e.max_iters,
                eta0: e.eta0,
                loss: e.loss,
                k0: e.k0,
                curve_max_k,
            };
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Vec<ExperimentConfig>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
