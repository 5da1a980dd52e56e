//! Feature normalization and PCA, fitted on a training split only.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Dataset;

/// Columns whose sample standard deviation is below this are centered only.
pub const CONSTANT_COLUMN_STD: f64 = 1e-12;
/// Datasets wider than this are PCA-reduced to this many components.
pub const PCA_THRESHOLD: usize = 150;

/// A fitted affine feature transform: center, optionally scale per column,
/// optionally project onto a PCA basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    means: Vec<f64>,
    stds: Option<Vec<f64>>,
    /// `d × p`, orthonormal columns.
    pca_basis: Option<DMatrix<f64>>,
}

fn column_means(data: &Dataset) -> Vec<f64> {
    let mut means = vec![0.0; data.dim()];
    for row in data.rows() {
        means.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    let n = data.len() as f64;
    means.iter_mut().for_each(|m| *m /= n);
    means
}

/// Per-column `(x - mean) / std` with the sample (n - 1) standard deviation.
pub fn fit_zscore(data: &Dataset) -> Preprocessor {
    let means = column_means(data);
    let mut var = vec![0.0; data.dim()];
    for row in data.rows() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&means) {
            *v += (x - m) * (x - m);
        }
    }
    let denom = (data.len() - 1) as f64;
    let stds = var.into_iter().map(|v| (v / denom).sqrt()).collect();
    Preprocessor {
        means,
        stds: Some(stds),
        pca_basis: None,
    }
}

/// Centers and projects onto the top `target_dim` principal components
/// (descending variance; each component's largest-magnitude entry made
/// positive). When `target_dim ≥ d` the transform is the identity.
pub fn fit_pca(data: &Dataset, target_dim: usize) -> Result<Preprocessor> {
    if target_dim == 0 {
        return Err(Error::InvalidArgument("PCA target dimension must be ≥ 1".into()));
    }
    let d = data.dim();
    if target_dim >= d {
        return Ok(Preprocessor {
            means: vec![0.0; d],
            stds: None,
            pca_basis: None,
        });
    }
    let means = column_means(data);
    let x = data.to_matrix();
    let centered = DMatrix::from_fn(x.nrows(), d, |i, j| x[(i, j)] - means[j]);
    let cov = (centered.transpose() * &centered) / (data.len() - 1) as f64;
    let eig = SymmetricEigen::try_new(cov, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("covariance eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut basis = DMatrix::zeros(d, target_dim);
    for (k, &src) in order.iter().take(target_dim).enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
        basis.set_column(k, &col);
    }
    Ok(Preprocessor {
        means,
        stds: None,
        pca_basis: Some(basis),
    })
}

impl Preprocessor {
    pub fn input_dim(&self) -> usize {
        self.means.len()
    }

    pub fn output_dim(&self) -> usize {
        self.pca_basis.as_ref().map_or(self.means.len(), |b| b.ncols())
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> Option<&[f64]> {
        self.stds.as_deref()
    }

    pub fn pca_basis(&self) -> Option<&DMatrix<f64>> {
        self.pca_basis.as_ref()
    }

    /// Transforms one feature vector.
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: row.len(),
            });
        }
        let mut v: Vec<f64> = row.iter().zip(&self.means).map(|(x, m)| x - m).collect();
        if let Some(stds) = &self.stds {
            for (x, &s) in v.iter_mut().zip(stds) {
                if s >= CONSTANT_COLUMN_STD {
                    *x /= s;
                }
            }
        }
        if let Some(b) = &self.pca_basis {
            v = (0..b.ncols())
                .map(|k| b.column(k).iter().zip(&v).map(|(a, x)| a * x).sum())
                .collect();
        }
        Ok(v)
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let mut out = Vec::with_capacity(data.len() * self.output_dim());
        for row in data.rows() {
            out.extend(self.transform_row(row)?);
        }
        data.with_features(self.output_dim(), out)
    }
}

/// The standard preprocessing chain: z-score, then PCA to
/// [`PCA_THRESHOLD`] dimensions when wider than that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub steps: Vec<Preprocessor>,
}

impl Pipeline {
    pub fn fit(train: &Dataset) -> Result<Self> {
        let z = fit_zscore(train);
        let mut steps = vec![z];
        if train.dim() > PCA_THRESHOLD {
            let normalized = steps[0].apply(train)?;
            steps.push(fit_pca(&normalized, PCA_THRESHOLD)?);
        }
        Ok(Pipeline { steps })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let mut cur = data.clone();
        for s in &self.steps {
            cur = s.apply(&cur)?;
        }
        Ok(cur)
    }
}
