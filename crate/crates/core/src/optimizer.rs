//! Projected gradient descent with multiplicative step adaptation.
//!
//! Each iteration proposes `M̂ = Π_PSD(M - η ∇J(M))`. A proposal that lowers
//! the objective is accepted and the step grows by 5%; otherwise the
//! iterate stays put and the step is halved. The gradient is only
//! recomputed after an accepted step.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::metric::psd_project;
use crate::objective::AnnProblem;
use crate::types::{Dataset, HyperParams, MetricMatrix, NeighborSets, TraceEntry, TrainReport};

pub const STEP_GROWTH: f64 = 1.05;
pub const STEP_SHRINK: f64 = 0.5;
/// Training stops once the step size falls below this.
pub const MIN_STEP: f64 = 1e-12;
/// Training stops after this many consecutive rejections.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 30;

/// Current iterate of the optimizer.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub m: MetricMatrix,
    pub eta: f64,
    pub best_objective: f64,
    pub iteration: usize,
}

/// `I / √N`.
pub fn default_init(data: &Dataset) -> MetricMatrix {
    MetricMatrix::scaled_identity(data.dim(), 1.0 / (data.len() as f64).sqrt()).expect("1/sqrt(N) is a valid scale")
}

/// Trains a metric from `init`.
pub fn train(data: &Dataset, nbrs: &NeighborSets, hp: &HyperParams, init: &MetricMatrix) -> Result<TrainReport> {
    train_with_progress(data, nbrs, hp, init, |_| {})
}

/// [`train`] with a callback invoked after every iteration.
pub fn train_with_progress(
    data: &Dataset,
    nbrs: &NeighborSets,
    hp: &HyperParams,
    init: &MetricMatrix,
    mut progress: impl FnMut(&TraceEntry),
) -> Result<TrainReport> {
    let start = Instant::now();
    let problem = AnnProblem::new(data, nbrs, hp)?;
    if init.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: init.dim(),
        });
    }

    let (j0, mut grad) = problem.value_and_gradient(init.as_matrix())?;
    check_finite("objective", j0, 0, hp.eta0)?;
    check_gradient(&grad, 0, hp.eta0)?;

    let mut state = OptimizerState {
        m: init.clone(),
        eta: hp.eta0,
        best_objective: j0,
        iteration: 0,
    };
    let mut trace = Vec::with_capacity(hp.max_iters);
    let mut rejections = 0;

    while state.iteration < hp.max_iters {
        state.iteration += 1;
        let step = state.m.as_matrix() - &grad * state.eta;
        let candidate = psd_project(&step)?;
        let j_new = problem.value(candidate.as_matrix())?;
        check_finite("objective", j_new, state.iteration, state.eta)?;

        let accepted = j_new < state.best_objective;
        let entry = TraceEntry {
            iteration: state.iteration,
            objective: j_new,
            eta: state.eta,
            accepted,
        };
        trace.push(entry);
        progress(&entry);

        if accepted {
            grad = problem.gradient(candidate.as_matrix())?;
            check_gradient(&grad, state.iteration, state.eta)?;
            state.m = candidate;
            state.best_objective = j_new;
            state.eta *= STEP_GROWTH;
            rejections = 0;
        } else {
            state.eta *= STEP_SHRINK;
            rejections += 1;
        }
        if state.eta < MIN_STEP || rejections >= MAX_CONSECUTIVE_REJECTIONS {
            break;
        }
    }

    Ok(TrainReport {
        final_metric: state.m,
        initial_objective: j0,
        final_objective: state.best_objective,
        iterations_run: state.iteration,
        objective_trace: trace,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn check_finite(what: &'static str, v: f64, iteration: usize, eta: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what, iteration, eta })
    }
}

fn check_gradient(g: &nalgebra::DMatrix<f64>, iteration: usize, eta: f64) -> Result<()> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: "gradient",
            iteration,
            eta,
        })
    }
}
