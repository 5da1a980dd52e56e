//! Domain types shared by every module.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::LossFn;

/// Maximum elementwise asymmetry accepted by [`MetricMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Smallest eigenvalue accepted by [`MetricMatrix::new`].
pub const PSD_TOL: f64 = -1e-10;

/// Labeled samples stored row-major.
///
/// Labels are class ids in `1..=C`; every class id in that range owns at
/// least one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    d: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from a row-major `n × d` buffer.
    pub fn new(n: usize, d: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().copied().max().unwrap_or(0);
        let ds = Dataset {
            n,
            d,
            features,
            labels,
            n_classes,
            names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidDataset(format!(
                "row {i} has {} features, expected {d}",
                r.len()
            )));
        }
        let features = rows.iter().flatten().copied().collect();
        Dataset::new(rows.len(), d, features, labels)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    /// Checks every dataset invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDataset(msg));
        if self.n < 2 {
            return bad(format!("N ≥ 2 required, got {}", self.n));
        }
        if self.d < 1 {
            return bad("d ≥ 1 required".into());
        }
        if self.features.len() != self.n * self.d {
            return bad(format!(
                "feature buffer holds {} values, expected {}",
                self.features.len(),
                self.n * self.d
            ));
        }
        if self.labels.len() != self.n {
            return bad(format!("{} labels for {} samples", self.labels.len(), self.n));
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            return bad(format!(
                "non-finite value at sample {}, feature {}",
                pos / self.d,
                pos % self.d
            ));
        }
        if let Some(i) = self.labels.iter().position(|&y| y == 0) {
            return bad(format!("label out of range 1..C at sample {i}"));
        }
        if self.n_classes < 2 {
            return bad("C ≥ 2 required".into());
        }
        let counts = self.class_counts();
        if let Some(c) = counts.iter().position(|&k| k == 0) {
            return bad(format!("class {} has no samples", c + 1));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Sample counts per class, indexed by `class - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            if (1..=self.n_classes).contains(&y) {
                counts[y - 1] += 1;
            }
        }
        counts
    }

    /// Indices of the samples of each class, indexed by `class - 1`.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y - 1].push(i);
        }
        members
    }

    /// Feature matrix as an `n × d` nalgebra matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.features)
    }

    /// Same labels, new features (must be `n × d'`).
    pub fn with_features(&self, d: usize, features: Vec<f64>) -> Result<Self> {
        let mut out = Dataset::new(self.n, d, features, self.labels.clone())?;
        out.n_classes = self.n_classes;
        if d == self.d {
            out.names = self.names.clone();
        }
        out.validate()?;
        Ok(out)
    }

    /// Samples at `indices`, keeping the class numbering of `self`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::InvalidArgument(format!(
                    "subset index {i} out of range for {} samples",
                    self.n
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let out = Dataset {
            n: indices.len(),
            d: self.d,
            features,
            labels,
            n_classes: self.n_classes,
            names: self.names.clone(),
        };
        out.validate()?;
        Ok(out)
    }
}

/// Symmetric positive-semidefinite `d × d` matrix parameterizing the distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct MetricMatrix {
    m: DMatrix<f64>,
}

impl MetricMatrix {
    /// Validates `m` and stores its exact symmetrization `(m + mᵀ)/2`.
    ///
    /// Fails if `m` is not square, not finite, asymmetric beyond
    /// [`SYMMETRY_TOL`], or has an eigenvalue below [`PSD_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidMetric(format!(
                "expected a non-empty square matrix, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMetric("non-finite entry".into()));
        }
        let asym = max_asymmetry(&m);
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidMetric(format!(
                "asymmetry {asym:e} exceeds {SYMMETRY_TOL:e}"
            )));
        }
        let m = symmetrize(&m);
        let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
        if min_eig < PSD_TOL {
            return Err(Error::InvalidMetric(format!(
                "smallest eigenvalue {min_eig:e} below {PSD_TOL:e}"
            )));
        }
        Ok(MetricMatrix { m })
    }

    /// Wraps a matrix already known to be symmetric PSD (exact symmetry enforced).
    pub(crate) fn from_psd_unchecked(m: DMatrix<f64>) -> Self {
        MetricMatrix { m: symmetrize(&m) }
    }

    pub fn identity(d: usize) -> Self {
        MetricMatrix {
            m: DMatrix::identity(d, d),
        }
    }

    /// `scale · I`; `scale` must be non-negative.
    pub fn scaled_identity(d: usize, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidMetric(format!("scale {scale} is not ≥ 0")));
        }
        Ok(MetricMatrix {
            m: DMatrix::identity(d, d) * scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    /// `c · M` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidMetric(format!("scale {c} is not ≥ 0")));
        }
        Ok(MetricMatrix { m: &self.m * c })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.m.clone()).eigenvalues.min()
    }
}

impl TryFrom<DMatrix<f64>> for MetricMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        MetricMatrix::new(m)
    }
}

impl From<MetricMatrix> for DMatrix<f64> {
    fn from(m: MetricMatrix) -> Self {
        m.m
    }
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `(m + mᵀ)/2` with mirrored entries bit-identical.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Per-sample similarity sets `S_i` and dissimilarity sets `D_i`
/// (0-based sample indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSets {
    similar: Vec<Vec<usize>>,
    dissimilar: Vec<Vec<usize>>,
}

impl NeighborSets {
    /// Builds neighbor sets and checks them against `data`.
    ///
    /// Self-membership, label consistency and non-emptiness are enforced
    /// for every sample.
    pub fn new(data: &Dataset, similar: Vec<Vec<usize>>, dissimilar: Vec<Vec<usize>>) -> Result<Self> {
        let sets = NeighborSets { similar, dissimilar };
        sets.validate(data)?;
        Ok(sets)
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNeighbors(msg));
        let n = data.len();
        if self.similar.len() != n || self.dissimilar.len() != n {
            return bad(format!(
                "{} similar / {} dissimilar sets for {n} samples",
                self.similar.len(),
                self.dissimilar.len()
            ));
        }
        for i in 0..n {
            let yi = data.label(i);
            if self.similar[i].is_empty() {
                return bad(format!("S_{i} is empty"));
            }
            if self.dissimilar[i].is_empty() {
                return bad(format!("D_{i} is empty"));
            }
            for &j in &self.similar[i] {
                if j >= n || j == i || data.label(j) != yi {
                    return bad(format!("S_{i} contains invalid member {j}"));
                }
            }
            for &l in &self.dissimilar[i] {
                if l >= n || l == i || data.label(l) == yi {
                    return bad(format!("D_{i} contains invalid member {l}"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.similar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.similar.is_empty()
    }

    pub fn similar(&self, i: usize) -> &[usize] {
        &self.similar[i]
    }

    pub fn dissimilar(&self, i: usize) -> &[usize] {
        &self.dissimilar[i]
    }
}

/// Model and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Balances the effective neighbor counts of `S_i` and `D_i`; sign picks ANN⁺/ANN⁻.
    pub alpha: f64,
    /// Loss-sensitivity scale.
    pub gamma: f64,
    /// Regularization weight on the summed similar-pair distances.
    pub lambda: f64,
    pub loss: LossFn,
    /// K used by the classifier.
    pub k_predict: usize,
    pub max_iters: usize,
    pub eta0: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha: 1.0,
            gamma: 1.0,
            lambda: 0.0,
            loss: LossFn::default(),
            k_predict: 1,
            max_iters: 200,
            eta0: 1e-3,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperParams(msg));
        if !self.alpha.is_finite() || self.alpha == 0.0 {
            return bad(format!("alpha must be finite and nonzero, got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be ≥ 0, got {}", self.lambda));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("eta0 must be > 0, got {}", self.eta0));
        }
        if self.max_iters < 1 {
            return bad("max_iters must be ≥ 1".into());
        }
        if self.k_predict < 1 {
            return bad("k_predict must be ≥ 1".into());
        }
        self.loss.validate()
    }
}

/// One optimizer iteration: the candidate's objective, the step size that
/// produced it, and whether it was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub eta: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_metric: MetricMatrix,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub objective_trace: Vec<TraceEntry>,
    pub iterations_run: usize,
    pub wall_time_seconds: f64,
}

impl TrainReport {
    /// Objective values of the accepted iterates, in order.
    pub fn accepted_objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.objective_trace.iter().filter(|e| e.accepted).map(|e| e.objective)
    }
}
