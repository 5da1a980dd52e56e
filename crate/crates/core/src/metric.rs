//! Mahalanobis geometry under a metric matrix `M`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::types::{max_asymmetry, Dataset, MetricMatrix, NeighborSets};

/// Eigenvalues at or below this are dropped by [`psd_project`].
pub const EIGEN_DROP_TOL: f64 = 1e-12;
/// Largest input asymmetry accepted by [`psd_project`].
pub const PROJECT_SYMMETRY_TOL: f64 = 1e-6;

/// Squared distance `(a - b)ᵀ M (a - b)`, clamped at zero.
pub fn mahalanobis_sq(m: &MetricMatrix, a: &[f64], b: &[f64]) -> Result<f64> {
    let d = m.dim();
    for v in [a, b] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    Ok(quad_form(m.as_matrix(), a, b))
}

pub(crate) fn quad_form(m: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d = a.len();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mut acc = 0.0;
    for j in 0..d {
        let col = m.column(j);
        let mut s = 0.0;
        for i in 0..d {
            s += diff[i] * col[i];
        }
        acc += s * diff[j];
    }
    acc.max(0.0)
}

/// Rows of a dataset premultiplied by `M`, so that a pair distance costs
/// `O(d)`: `d_M(x_i, x_j) = Σ_k (x_ik - x_jk)(p_ik - p_jk)` with `p = x M`.
pub(crate) struct Projected<'a> {
    data: &'a Dataset,
    p: Vec<f64>,
}

impl<'a> Projected<'a> {
    pub(crate) fn new(m: &DMatrix<f64>, data: &'a Dataset) -> Self {
        let d = data.dim();
        let mut p = vec![0.0; data.len() * d];
        for (row, out) in data.rows().zip(p.chunks_exact_mut(d)) {
            for (j, o) in out.iter_mut().enumerate() {
                let col = m.column(j);
                *o = row.iter().zip(col.iter()).map(|(x, c)| x * c).sum();
            }
        }
        Projected { data, p }
    }

    pub(crate) fn dist(&self, i: usize, j: usize) -> f64 {
        let d = self.data.dim();
        let (xi, xj) = (self.data.row(i), self.data.row(j));
        let (pi, pj) = (&self.p[i * d..(i + 1) * d], &self.p[j * d..(j + 1) * d]);
        let mut acc = 0.0;
        for k in 0..d {
            acc += (xi[k] - xj[k]) * (pi[k] - pj[k]);
        }
        acc.max(0.0)
    }

    pub(crate) fn dists(&self, i: usize, others: &[usize]) -> Vec<f64> {
        others.iter().map(|&j| self.dist(i, j)).collect()
    }
}

/// Distances from each inquiry sample to the members of its `S_i` and
/// `D_i`, in index-set order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    pub similar: Vec<Vec<f64>>,
    pub dissimilar: Vec<Vec<f64>>,
}

pub fn distance_table(m: &MetricMatrix, data: &Dataset, nbrs: &NeighborSets) -> Result<DistanceTable> {
    if m.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: m.dim(),
        });
    }
    nbrs.validate(data)?;
    let proj = Projected::new(m.as_matrix(), data);
    let n = data.len();
    Ok(DistanceTable {
        similar: (0..n).map(|i| proj.dists(i, nbrs.similar(i))).collect(),
        dissimilar: (0..n).map(|i| proj.dists(i, nbrs.dissimilar(i))).collect(),
    })
}

/// Projection onto the PSD cone: keeps `Σ σ_i u_i u_iᵀ` over eigenvalues
/// `σ_i > 1e-12` of the (symmetrized) input.
pub fn psd_project(m: &DMatrix<f64>) -> Result<MetricMatrix> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "psd_project expects a non-empty square matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite input".into()));
    }
    let asym = max_asymmetry(m);
    if asym > PROJECT_SYMMETRY_TOL * (1.0 + m.amax()) {
        return Err(Error::InvalidArgument(format!(
            "psd_project input asymmetric by {asym:e}"
        )));
    }
    let sym = crate::types::symmetrize(m);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigendecomposition did not converge".into()))?;
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (k, &sigma) in eig.eigenvalues.iter().enumerate() {
        if sigma > EIGEN_DROP_TOL {
            let u = eig.eigenvectors.column(k);
            out.ger(sigma, &u, &u, 1.0);
        }
    }
    Ok(MetricMatrix::from_psd_unchecked(out))
}
