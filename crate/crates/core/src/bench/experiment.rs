//! The evaluation protocol.
//!
//! Every repetition draws a seeded stratified split, fits preprocessing on
//! the training part, picks (α, γ) by stratified k-fold cross-validation on
//! the training part, retrains on all of it and scores K-NN on the test
//! part for every K. The regularization weight is `1/N²` with `N` the size
//! of the set being trained on.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use super::report::{AccuracyRecord, RepetitionResult};
use super::split::{stratified_folds, stratified_split, Split};
use crate::classifier::accuracy_by_k;
use crate::data::{build_neighbor_sets, load, NeighborMode, Pipeline};
use crate::error::{Error, Result};
use crate::objective::{nca_objective, pnca_objective, LossFn};
use crate::optimizer::{default_init, train};
use crate::types::{Dataset, HyperParams, MetricMatrix, NeighborSets, TrainReport};

/// Hyperparameters chosen by cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub alpha: f64,
    pub gamma: f64,
    /// Best mean fold accuracy over the K grid.
    pub score: f64,
}

pub fn neighbor_mode(cfg: &ExperimentConfig) -> NeighborMode {
    match cfg.method {
        Method::AnnMinus => NeighborMode::KnnSameClass(cfg.k0),
        _ => NeighborMode::AllSameClass,
    }
}

pub fn hyper_params(cfg: &ExperimentConfig, n: usize, alpha: f64, gamma: f64) -> HyperParams {
    HyperParams {
        alpha,
        gamma,
        lambda: 1.0 / (n * n) as f64,
        loss: if cfg.method == Method::PncaReport {
            LossFn::Identity
        } else {
            cfg.loss
        },
        k_predict: 1,
        max_iters: cfg.max_iters,
        eta0: cfg.eta0,
    }
}

/// Trains a metric on `data` from `I/√N`.
pub fn fit_metric(
    cfg: &ExperimentConfig,
    data: &Dataset,
    alpha: f64,
    gamma: f64,
) -> Result<(TrainReport, NeighborSets)> {
    let nbrs = build_neighbor_sets(data, neighbor_mode(cfg))?;
    let hp = hyper_params(cfg, data.len(), alpha, gamma);
    let report = train(data, &nbrs, &hp, &default_init(data))?;
    Ok((report, nbrs))
}

/// The split and the generator state that continues into fold assignment.
pub fn repetition_split(cfg: &ExperimentConfig, data: &Dataset, rep: usize) -> Result<(Split, ChaCha8Rng)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let split = stratified_split(data, cfg.split_fraction, &mut rng)?;
    Ok((split, rng))
}

/// Grid search over (α, γ). Candidates are visited by increasing |α| then
/// γ and only a strictly better score replaces the incumbent. A candidate
/// whose training diverges is skipped.
pub fn select_hyperparams(cfg: &ExperimentConfig, train: &Dataset, folds: &[Split]) -> Result<Selection> {
    let mut grid: Vec<(f64, f64)> = cfg
        .signed_alphas()
        .into_iter()
        .flat_map(|a| cfg.gamma_grid.iter().map(move |&g| (a, g)))
        .collect();
    grid.sort_by(|x, y| x.0.abs().total_cmp(&y.0.abs()).then(x.1.total_cmp(&y.1)));
    grid.dedup();

    let fold_sets: Vec<(Dataset, Dataset)> = folds
        .iter()
        .map(|f| Ok((train.subset(&f.train)?, train.subset(&f.test)?)))
        .collect::<Result<_>>()?;

    let scores: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&(alpha, gamma)| {
            let mut sum = vec![0.0; cfg.k_grid.len()];
            for (fit, val) in &fold_sets {
                let metric = match fit_metric(cfg, fit, alpha, gamma) {
                    Ok((r, _)) => r.final_metric,
                    Err(Error::NonFinite { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let acc = accuracy_by_k(fit, &metric, val, &cfg.k_grid)?;
                sum.iter_mut().zip(acc).for_each(|(s, a)| *s += a);
            }
            let n = fold_sets.len() as f64;
            Ok(Some(sum.into_iter().map(|s| s / n).fold(f64::NEG_INFINITY, f64::max)))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<Selection> = None;
    for (&(alpha, gamma), score) in grid.iter().zip(scores) {
        let Some(score) = score else { continue };
        if best.is_none_or(|b| score > b.score) {
            best = Some(Selection { alpha, gamma, score });
        }
    }
    best.ok_or_else(|| Error::Config(format!("every grid point diverged on {}", cfg.dataset)))
}

/// Runs repetition `rep` of `cfg` on an already loaded dataset.
pub fn run_repetition(cfg: &ExperimentConfig, data: &Dataset, rep: usize) -> Result<RepetitionResult> {
    let (split, mut rng) = repetition_split(cfg, data, rep)?;
    let train_raw = data.subset(&split.train)?;
    let test_raw = data.subset(&split.test)?;
    let pipeline = Pipeline::fit(&train_raw)?;
    let train_set = pipeline.apply(&train_raw)?;
    let test_set = pipeline.apply(&test_raw)?;

    let start = Instant::now();
    let mut out = RepetitionResult {
        accuracy: 0.0,
        k: 0,
        alpha: None,
        gamma: None,
        cv_score: None,
        acc_by_k: Vec::new(),
        curve: Vec::new(),
        final_objective: None,
        nca_objective: None,
        pnca_objective: None,
        train_seconds: 0.0,
    };
    let metric = if cfg.method.trains() {
        let folds = stratified_folds(&train_set, cfg.cv_folds, &mut rng)?;
        let sel = select_hyperparams(cfg, &train_set, &folds)?;
        let (report, nbrs) = fit_metric(cfg, &train_set, sel.alpha, sel.gamma)?;
        out.alpha = Some(sel.alpha);
        out.gamma = Some(sel.gamma);
        out.cv_score = Some(sel.score);
        out.final_objective = Some(report.final_objective);
        if cfg.method == Method::PncaReport {
            out.nca_objective = Some(nca_objective(&report.final_metric, &train_set)?);
            out.pnca_objective = Some(pnca_objective(&report.final_metric, &train_set, &nbrs, sel.alpha)?);
        }
        report.final_metric
    } else {
        MetricMatrix::identity(train_set.dim())
    };
    out.train_seconds = start.elapsed().as_secs_f64();

    let curve_ks: Vec<usize> = (1..=cfg.curve_max_k).collect();
    let all_ks: Vec<usize> = cfg.k_grid.iter().copied().chain(curve_ks).collect();
    let mut acc = accuracy_by_k(&train_set, &metric, &test_set, &all_ks)?;
    out.curve = acc.split_off(cfg.k_grid.len());
    out.acc_by_k = acc;
    let (best, &best_acc) = out
        .acc_by_k
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |b, (i, a)| if *a > *b.1 { (i, a) } else { b });
    out.accuracy = best_acc;
    out.k = cfg.k_grid[best];
    Ok(out)
}

/// Runs every repetition of `cfg` on `data`; repetitions execute in
/// parallel and are reported in order.
pub fn run_on_dataset(cfg: &ExperimentConfig, data: &Dataset) -> Result<AccuracyRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let reps = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(cfg, data, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(AccuracyRecord::from_repetitions(
        cfg.method,
        &cfg.dataset,
        cfg.k_grid.clone(),
        reps,
        start.elapsed().as_secs_f64(),
    ))
}

/// Loads the configured dataset and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AccuracyRecord> {
    let data = load(&cfg.path, &cfg.format)?;
    run_on_dataset(cfg, &data)
}

/// Runs experiments in configuration order.
pub fn run_all(cfgs: &[ExperimentConfig]) -> Result<Vec<AccuracyRecord>> {
    cfgs.iter().map(run_experiment).collect()
}
