//! Adaptive nearest neighbor (ANN) distance metric learning.
//!
//! The learned object is a positive-semidefinite matrix `M` defining the
//! squared distance `(a - b)ᵀ M (a - b)`. Training minimizes a smooth
//! surrogate of the K-NN empirical risk in which the averages of the K
//! nearest similar and dissimilar distances are replaced by log-sum-exp
//! soft aggregates. The sign of `alpha` selects between emphasizing the
//! nearest (`alpha > 0`) and the farthest (`alpha < 0`, convex) similar
//! neighbors; `alpha = 1` with the identity loss recovers NCA.
//!
//! Module map:
//!
//! - [`types`]: datasets, metric matrices, neighbor sets, hyperparameters
//! - [`softagg`]: top-K averages, the soft aggregate and its root solver
//! - [`metric`]: Mahalanobis distances and PSD projection
//! - [`objective`]: ANN objective, gradient, NCA/PNCA objectives
//! - [`optimizer`]: projected gradient descent with step adaptation
//! - [`classifier`]: K-NN prediction under a learned metric
//! - [`data`]: loaders, normalization, PCA, neighbor-set construction
//! - [`bench`]: experiment protocol, reports and the `ann-bench` CLI backend

pub mod bench;
pub mod classifier;
pub mod data;
pub mod error;
pub mod metric;
pub mod objective;
pub mod optimizer;
pub mod softagg;
pub mod types;

pub use error::{Error, Result};
pub use types::{Dataset, HyperParams, MetricMatrix, NeighborSets, TraceEntry, TrainReport};
