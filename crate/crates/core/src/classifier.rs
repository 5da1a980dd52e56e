//! K-NN classification under a learned metric.
//!
//! A query is assigned to the class whose K nearest members are, on average,
//! closest (squared Mahalanobis distance). K is capped per class at the
//! class size; ties go to the smallest class id.

use crate::error::{Error, Result};
use crate::softagg::topk_avg_smallest;
use crate::types::{Dataset, MetricMatrix};

/// A fitted K-NN model: training samples, metric and K.
#[derive(Debug, Clone)]
pub struct FitKnn {
    train: Dataset,
    metric: MetricMatrix,
    k: usize,
    projected: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl FitKnn {
    pub fn new(train: Dataset, metric: MetricMatrix, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidArgument("K must be ≥ 1".into()));
        }
        if metric.dim() != train.dim() {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                got: metric.dim(),
            });
        }
        let projected = train.rows().flat_map(|r| apply(&metric, r)).collect();
        let members = train.class_members();
        Ok(FitKnn {
            train,
            metric,
            k,
            projected,
            members,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> &MetricMatrix {
        &self.metric
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.train.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.train.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Squared distances from `x` to every training sample.
    pub fn distances(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_query(x)?;
        Ok(self.distances_unchecked(x))
    }

    fn distances_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let d = self.train.dim();
        let mx = apply(&self.metric, x);
        self.train
            .rows()
            .zip(self.projected.chunks_exact(d))
            .map(|(row, p)| {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += (x[k] - row[k]) * (mx[k] - p[k]);
                }
                acc.max(0.0)
            })
            .collect()
    }

    /// Bi-class decision value for class `c`: mean of the K nearest
    /// in-class distances minus that of the K nearest out-of-class
    /// distances. Negative means `x` is assigned to `c`.
    pub fn decision_score(&self, x: &[f64], c: usize) -> Result<f64> {
        self.check_query(x)?;
        if c == 0 || c > self.train.n_classes() {
            return Err(Error::InvalidArgument(format!("unknown class {c}")));
        }
        let dist = self.distances_unchecked(x);
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for (i, v) in dist.into_iter().enumerate() {
            if self.train.label(i) == c {
                inside.push(v);
            } else {
                outside.push(v);
            }
        }
        let a = topk_avg_smallest(&inside, self.k.min(inside.len()))?;
        let b = topk_avg_smallest(&outside, self.k.min(outside.len()))?;
        Ok(a - b)
    }

    /// Per-class mean of the K nearest in-class distances, indexed by `class - 1`.
    pub fn class_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_query(x)?;
        let dist = self.distances_unchecked(x);
        self.members
            .iter()
            .map(|m| {
                let v: Vec<f64> = m.iter().map(|&i| dist[i]).collect();
                topk_avg_smallest(&v, self.k.min(v.len()))
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmin_class(&self.class_scores(x)?))
    }

    /// Fraction of `test` samples predicted correctly.
    pub fn accuracy(&self, test: &Dataset) -> Result<f64> {
        Ok(accuracy_by_k(&self.train, &self.metric, test, &[self.k])?[0])
    }
}

fn apply(m: &MetricMatrix, x: &[f64]) -> Vec<f64> {
    let m = m.as_matrix();
    (0..x.len())
        .map(|j| m.column(j).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn argmin_class(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = c;
        }
    }
    best + 1
}

/// Accuracy on `test` for each K in `ks`, sharing one distance pass.
pub fn accuracy_by_k(train: &Dataset, metric: &MetricMatrix, test: &Dataset, ks: &[usize]) -> Result<Vec<f64>> {
    if test.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: test.dim(),
        });
    }
    if ks.contains(&0) {
        return Err(Error::InvalidArgument("K must be ≥ 1".into()));
    }
    let fit = FitKnn::new(train.clone(), metric.clone(), 1)?;
    let mut correct = vec![0usize; ks.len()];
    for (x, &y) in test.rows().zip(test.labels()) {
        let dist = fit.distances_unchecked(x);
        // prefix sums of sorted in-class distances
        let prefix: Vec<Vec<f64>> = fit
            .members
            .iter()
            .map(|m| {
                let mut v: Vec<f64> = m.iter().map(|&i| dist[i]).collect();
                v.sort_by(f64::total_cmp);
                let mut acc = 0.0;
                v.into_iter()
                    .map(|d| {
                        acc += d;
                        acc
                    })
                    .collect()
            })
            .collect();
        for (slot, &k) in ks.iter().enumerate() {
            let scores: Vec<f64> = prefix
                .iter()
                .map(|p| {
                    let kk = k.min(p.len());
                    p[kk - 1] / kk as f64
                })
                .collect();
            if argmin_class(&scores) == y {
                correct[slot] += 1;
            }
        }
    }
    Ok(correct.iter().map(|&c| c as f64 / test.len() as f64).collect())
}
