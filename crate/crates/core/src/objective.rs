//! The ANN objective, its analytic gradient and the NCA/PNCA objectives.
//!
//! For inquiry sample `i` with similar distances `s_j` (`j ∈ S_i`) and
//! dissimilar distances `t_l` (`l ∈ D_i`):
//!
//! ```text
//! ds_i = -(1/α) ln( mean_j exp(-α s_j) )     soft similar-side distance
//! dd_i = -ln( mean_l exp(-t_l) )             soft dissimilar-side distance
//! J(M) = Σ_i ℓ((ds_i - dd_i)/γ) + λ Σ_i Σ_{j∈S_i} s_j
//! ```
//!
//! The gradient is a weighted sum of outer products `X_ab = (x_a - x_b)(x_a - x_b)ᵀ`
//! with softmax weights `r^s = softmax(-α s)`, `r^d = softmax(-t)` and the
//! chain factor `ξ_i = ℓ'((ds_i - dd_i)/γ) / γ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Projected;
use crate::softagg::soft_agg_unchecked;
use crate::types::{Dataset, HyperParams, MetricMatrix, NeighborSets};

/// Loss applied to the scaled margin `(ds - dd)/γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFn {
    /// `max(0, x + margin)`, with derivative 0 at the kink.
    Hinge { margin: f64 },
    /// `x`
    Identity,
    /// `(1/s) ln(1 + exp(s (x + margin)))`
    Softplus { margin: f64, sharpness: f64 },
}

impl Default for LossFn {
    fn default() -> Self {
        LossFn::Hinge { margin: 1.0 }
    }
}

impl LossFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossFn::Hinge { margin } if !(margin >= 0.0 && margin.is_finite()) => Err(Error::InvalidHyperParams(
                format!("hinge margin must be ≥ 0, got {margin}"),
            )),
            LossFn::Softplus { margin, sharpness }
                if !(margin.is_finite() && sharpness > 0.0 && sharpness.is_finite()) =>
            {
                Err(Error::InvalidHyperParams(format!(
                    "softplus needs finite margin and sharpness > 0, got ({margin}, {sharpness})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            LossFn::Hinge { margin } => (x + margin).max(0.0),
            LossFn::Identity => x,
            LossFn::Softplus { margin, sharpness } => {
                let z = sharpness * (x + margin);
                let sp = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                sp / sharpness
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            LossFn::Hinge { margin } => {
                if x + margin > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LossFn::Identity => 1.0,
            LossFn::Softplus { margin, sharpness } => {
                let z = sharpness * (x + margin);
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }
}

/// Everything the objective and gradient need from one inquiry sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleTerms {
    /// Soft similar-side distance.
    pub ds: f64,
    /// Soft dissimilar-side distance.
    pub dd: f64,
    /// `(ds - dd)/γ`, the loss argument.
    pub margin: f64,
    /// `ℓ(margin)`
    pub loss: f64,
    /// `ℓ'(margin)/γ`
    pub xi: f64,
    /// Softmax weights over `S_i`.
    pub ws: Vec<f64>,
    /// Softmax weights over `D_i`.
    pub wd: Vec<f64>,
}

/// `softmax(-α · distances)`, shifted so the largest exponent is zero.
pub fn neighbor_weights(distances: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if distances.is_empty() {
        return Err(Error::InvalidArgument("neighbor_weights of an empty list".into()));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite, got {alpha}")));
    }
    Ok(softmax_neg(distances, alpha))
}

fn softmax_neg(distances: &[f64], alpha: f64) -> Vec<f64> {
    let shift = distances.iter().map(|&d| -alpha * d).fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = distances.iter().map(|&d| (-alpha * d - shift).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// `ln Σ exp(v)`
fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// The ANN problem over a fixed dataset, neighbor sets and hyperparameters.
///
/// Construction validates all inputs once; evaluation then takes raw
/// matrices so that optimizers and finite-difference checks can probe
/// arbitrary symmetric points.
#[derive(Debug, Clone)]
pub struct AnnProblem<'a> {
    data: &'a Dataset,
    nbrs: &'a NeighborSets,
    hp: HyperParams,
    centered: Vec<f64>,
}

impl<'a> AnnProblem<'a> {
    pub fn new(data: &'a Dataset, nbrs: &'a NeighborSets, hp: &HyperParams) -> Result<Self> {
        data.validate()?;
        nbrs.validate(data)?;
        hp.validate()?;
        // Only differences of rows enter the gradient; centering keeps the
        // expanded outer-product sums well conditioned.
        let (n, d) = (data.len(), data.dim());
        let mut mean = vec![0.0; d];
        for row in data.rows() {
            mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = data
            .rows()
            .flat_map(|row| row.iter().zip(&mean).map(|(x, m)| x - m).collect::<Vec<_>>())
            .collect();
        Ok(AnnProblem {
            data,
            nbrs,
            hp: hp.clone(),
            centered,
        })
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    fn check_dim(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.data.dim() || m.ncols() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: m.nrows(),
            });
        }
        Ok(())
    }

    fn terms_with(&self, proj: &Projected<'_>, i: usize, with_weights: bool) -> (PerSampleTerms, f64) {
        let s = proj.dists(i, self.nbrs.similar(i));
        let t = proj.dists(i, self.nbrs.dissimilar(i));
        let hp = &self.hp;
        let ds = soft_agg_unchecked(&s, hp.alpha);
        let dd = soft_agg_unchecked(&t, 1.0);
        let margin = (ds - dd) / hp.gamma;
        let loss = hp.loss.value(margin);
        let xi = hp.loss.derivative(margin) / hp.gamma;
        let (ws, wd) = if with_weights {
            (softmax_neg(&s, hp.alpha), softmax_neg(&t, 1.0))
        } else {
            (Vec::new(), Vec::new())
        };
        let reg: f64 = s.iter().sum();
        (
            PerSampleTerms {
                ds,
                dd,
                margin,
                loss,
                xi,
                ws,
                wd,
            },
            reg,
        )
    }

    /// Per-sample terms at `m` for inquiry sample `i`.
    pub fn sample_terms(&self, m: &DMatrix<f64>, i: usize) -> Result<PerSampleTerms> {
        self.check_dim(m)?;
        if i >= self.data.len() {
            return Err(Error::InvalidArgument(format!("sample index {i} out of range")));
        }
        let proj = Projected::new(m, self.data);
        Ok(self.terms_with(&proj, i, true).0)
    }

    /// `J(m)`; `m` need only be square of the right size.
    pub fn value(&self, m: &DMatrix<f64>) -> Result<f64> {
        self.check_dim(m)?;
        let proj = Projected::new(m, self.data);
        let mut loss = 0.0;
        let mut reg = 0.0;
        for i in 0..self.data.len() {
            let (t, r) = self.terms_with(&proj, i, false);
            loss += t.loss;
            reg += r;
        }
        Ok(loss + self.hp.lambda * reg)
    }

    /// `∂J/∂M` at `m`, exactly symmetric.
    pub fn gradient(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.value_and_gradient(m).map(|(_, g)| g)
    }

    pub fn value_and_gradient(&self, m: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        self.check_dim(m)?;
        let (n, d) = (self.data.len(), self.data.dim());
        let lambda = self.hp.lambda;
        let proj = Projected::new(m, self.data);
        let x = &self.centered;
        let row = |i: usize| &x[i * d..(i + 1) * d];

        // G = Σ_(a,b) c_ab X_ab expands to Σ_a (rowsum_a + colsum_a) x_a x_aᵀ
        //     - Σ_a (x_a u_aᵀ + u_a x_aᵀ), with u_a = Σ_b c_ab x_b.
        let mut diag_coef = vec![0.0; n];
        let mut u = vec![0.0; n * d];
        let mut loss = 0.0;
        let mut reg = 0.0;
        for i in 0..n {
            let (t, r) = self.terms_with(&proj, i, true);
            loss += t.loss;
            reg += r;
            if t.xi == 0.0 && lambda == 0.0 {
                continue;
            }
            let ui = &mut u[i * d..(i + 1) * d];
            let mut pair = |j: usize, c: f64, diag_coef: &mut [f64]| {
                diag_coef[i] += c;
                diag_coef[j] += c;
                ui.iter_mut().zip(row(j)).for_each(|(a, b)| *a += c * b);
            };
            for (&j, &w) in self.nbrs.similar(i).iter().zip(&t.ws) {
                pair(j, t.xi * w + lambda, &mut diag_coef);
            }
            if t.xi != 0.0 {
                for (&l, &w) in self.nbrs.dissimilar(i).iter().zip(&t.wd) {
                    pair(l, -t.xi * w, &mut diag_coef);
                }
            }
        }

        let mut g = DMatrix::zeros(d, d);
        for i in 0..n {
            let (xi, ui, c) = (row(i), &u[i * d..(i + 1) * d], diag_coef[i]);
            if c == 0.0 && ui.iter().all(|&v| v == 0.0) {
                continue;
            }
            for a in 0..d {
                for b in a..d {
                    g[(a, b)] += c * xi[a] * xi[b] - xi[a] * ui[b] - ui[a] * xi[b];
                }
            }
        }
        for a in 0..d {
            for b in (a + 1)..d {
                g[(b, a)] = g[(a, b)];
            }
        }
        Ok((loss + lambda * reg, g))
    }
}

/// Soft similar/dissimilar distances `(ds, dd)` for inquiry sample `i`.
pub fn soft_distances(
    m: &MetricMatrix,
    data: &Dataset,
    nbrs: &NeighborSets,
    alpha: f64,
    i: usize,
) -> Result<(f64, f64)> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and nonzero, got {alpha}"
        )));
    }
    let hp = HyperParams {
        alpha,
        ..HyperParams::default()
    };
    let terms = AnnProblem::new(data, nbrs, &hp)?.sample_terms(m.as_matrix(), i)?;
    Ok((terms.ds, terms.dd))
}

pub fn ann_objective(m: &MetricMatrix, data: &Dataset, nbrs: &NeighborSets, hp: &HyperParams) -> Result<f64> {
    AnnProblem::new(data, nbrs, hp)?.value(m.as_matrix())
}

pub fn ann_gradient(m: &MetricMatrix, data: &Dataset, nbrs: &NeighborSets, hp: &HyperParams) -> Result<DMatrix<f64>> {
    AnnProblem::new(data, nbrs, hp)?.gradient(m.as_matrix())
}

/// NCA's expected number of correctly classified samples:
/// `Σ_i Σ_{j: y_j = y_i, j ≠ i} p_ij` with `p_ij ∝ exp(-d_M(x_i, x_j))` over `j ≠ i`.
pub fn nca_objective(m: &MetricMatrix, data: &Dataset) -> Result<f64> {
    check_metric_dim(m, data)?;
    let proj = Projected::new(m.as_matrix(), data);
    let n = data.len();
    let mut total = 0.0;
    for i in 0..n {
        let dist: Vec<f64> = (0..n).map(|k| if k == i { 0.0 } else { proj.dist(i, k) }).collect();
        let dmin = (0..n)
            .filter(|&k| k != i)
            .map(|k| dist[k])
            .fold(f64::INFINITY, f64::min);
        let mut same = 0.0;
        let mut all = 0.0;
        for k in (0..n).filter(|&k| k != i) {
            let e = (-(dist[k] - dmin)).exp();
            all += e;
            if data.label(k) == data.label(i) {
                same += e;
            }
        }
        total += same / all;
    }
    Ok(total)
}

/// Parameterized NCA: `Σ_i A_i / (A_i + B_i)` with
/// `A_i = (Σ_{S_i} exp(-α d))^{1/α}` and `B_i = Σ_{D_i} exp(-d)`.
pub fn pnca_objective(m: &MetricMatrix, data: &Dataset, nbrs: &NeighborSets, alpha: f64) -> Result<f64> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be finite and nonzero, got {alpha}"
        )));
    }
    check_metric_dim(m, data)?;
    nbrs.validate(data)?;
    let proj = Projected::new(m.as_matrix(), data);
    let mut total = 0.0;
    for i in 0..data.len() {
        let s = proj.dists(i, nbrs.similar(i));
        let t = proj.dists(i, nbrs.dissimilar(i));
        let ln_a = log_sum_exp(s.iter().map(|&v| -alpha * v)) / alpha;
        let ln_b = log_sum_exp(t.iter().map(|&v| -v));
        total += 1.0 / (1.0 + (ln_b - ln_a).exp());
    }
    Ok(total)
}

fn check_metric_dim(m: &MetricMatrix, data: &Dataset) -> Result<()> {
    if m.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: m.dim(),
        });
    }
    Ok(())
}
