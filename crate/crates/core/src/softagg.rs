//! Scalar aggregation: exact top-K averages and the log-sum-exp soft
//! aggregate that interpolates between them.
//!
//! For values `a_1..a_n` and `γ ≠ 0` the soft aggregate is
//!
//! ```text
//! b(γ) = -(1/γ) · ln( (1/n) Σ exp(-γ a_i) )
//! ```
//!
//! It tends to the minimum as `γ → +∞`, the mean as `γ → 0` and the
//! maximum as `γ → -∞`, and is strictly decreasing in `γ` unless all values
//! coincide. Every average of the K smallest (largest) values is therefore
//! hit by exactly one positive (negative) `γ`, found by [`solve_gamma_star`].

use crate::error::{Error, Result};

/// Which end of the sorted values a top-K average draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

/// Outcome of [`solve_gamma_star`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaStar {
    /// A finite root: `soft_agg(values, γ) == target` within tolerance.
    Finite(f64),
    /// The target equals the mean, reached only in the `γ → 0` limit;
    /// callers should use the plain mean.
    MeanLimit,
    /// No `γ` within 200 doublings of the bracket meets the tolerance; the
    /// root is at `+∞` (smallest) or `-∞` (largest).
    Unbounded(f64),
}

impl GammaStar {
    /// The sentinel encoding: `0.0` for the mean limit, `±∞` when unbounded.
    pub fn value(self) -> f64 {
        match self {
            GammaStar::Finite(g) => g,
            GammaStar::MeanLimit => 0.0,
            GammaStar::Unbounded(g) => g,
        }
    }
}

const MAX_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 200;
const GAMMA_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("K = {k} out of range 1..={n}")));
    }
    Ok(())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean of the `k` smallest values.
pub fn topk_avg_smallest(values: &[f64], k: usize) -> Result<f64> {
    check_k(values.len(), k)?;
    let v = sorted(values);
    Ok(v[..k].iter().sum::<f64>() / k as f64)
}

/// Mean of the `k` largest values.
pub fn topk_avg_largest(values: &[f64], k: usize) -> Result<f64> {
    check_k(values.len(), k)?;
    let v = sorted(values);
    Ok(v[v.len() - k..].iter().sum::<f64>() / k as f64)
}

/// The soft aggregate `b(γ)`; see the module docs.
///
/// Evaluated relative to the minimum (`γ > 0`) or maximum (`γ < 0`) so that
/// every exponent is non-positive, with `expm1`/`ln_1p` keeping precision
/// for small `|γ|`.
pub fn soft_agg(values: &[f64], gamma: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("soft_agg of an empty list".into()));
    }
    if gamma == 0.0 || gamma.is_nan() {
        return Err(Error::InvalidArgument(
            "soft_agg requires gamma ≠ 0; use the mean for the γ → 0 limit".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("soft_agg of non-finite values".into()));
    }
    Ok(soft_agg_unchecked(values, gamma))
}

/// [`soft_agg`] without argument checks; `values` non-empty and finite, `gamma ≠ 0`.
pub(crate) fn soft_agg_unchecked(values: &[f64], gamma: f64) -> f64 {
    let (lo, hi) = min_max(values);
    let anchor = if gamma > 0.0 { lo } else { hi };
    let n = values.len() as f64;
    let s: f64 = values.iter().map(|&a| (-gamma * (a - anchor)).exp_m1()).sum::<f64>() / n;
    let b = anchor - s.ln_1p() / gamma;
    b.clamp(lo, hi)
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Finds `γ*` with `soft_agg(values, γ*)` equal to the mean of the `k`
/// smallest (`γ* > 0`) or `k` largest (`γ* < 0`) values.
///
/// The bracket grows geometrically from `|γ| = 1` until `b(γ) - target`
/// changes sign, then bisection runs until the residual is within
/// `1e-8 · (1 + |target|)` or the bracket is narrower than `1e-10`
/// (relative to its upper end).
pub fn solve_gamma_star(values: &[f64], k: usize, mode: Extreme) -> Result<GammaStar> {
    check_k(values.len(), k)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite values".into()));
    }
    match mode {
        Extreme::Smallest => Ok(solve_smallest(values, k)),
        Extreme::Largest => {
            // b(-γ; a) = -b(γ; -a): the largest-K problem is the smallest-K
            // problem on the negated values with the sign of γ flipped.
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            Ok(match solve_smallest(&neg, k) {
                GammaStar::Finite(g) => GammaStar::Finite(-g),
                GammaStar::MeanLimit => GammaStar::MeanLimit,
                GammaStar::Unbounded(g) => GammaStar::Unbounded(-g),
            })
        }
    }
}

fn solve_smallest(values: &[f64], k: usize) -> GammaStar {
    let n = values.len();
    let v = sorted(values);
    let target = v[..k].iter().sum::<f64>() / k as f64;
    let mean = v.iter().sum::<f64>() / n as f64;
    if k == n || v[n - 1] == v[0] || target >= mean {
        return GammaStar::MeanLimit;
    }
    let tol = RESIDUAL_TOL * (1.0 + target.abs());
    let f = |g: f64| soft_agg_unchecked(values, g) - target;

    // f(0) = mean - target > 0 and f decreases towards min - target ≤ 0.
    // When the target is the minimum itself (K = 1, or ties at the bottom)
    // the root sits at +∞, but any γ with f(γ) ≤ tol is accepted.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut f_hi = f(hi);
    let mut doublings = 0;
    while f_hi > tol {
        if doublings == MAX_DOUBLINGS {
            return GammaStar::Unbounded(f64::INFINITY);
        }
        lo = hi;
        hi *= 2.0;
        f_hi = f(hi);
        doublings += 1;
    }
    if f_hi.abs() <= tol {
        return GammaStar::Finite(hi);
    }

    let mut best = (hi, f_hi.abs());
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() < best.1 {
            best = (mid, f_mid.abs());
        }
        if f_mid.abs() <= tol {
            return GammaStar::Finite(mid);
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= GAMMA_TOL * hi.max(1.0) {
            break;
        }
    }
    GammaStar::Finite(best.0)
}
