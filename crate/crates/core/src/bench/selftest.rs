//! Randomized consistency checks runnable from the command line.
//!
//! These are quick seeded spot-checks of the library's core properties, for
//! use on a machine where the test suite is not at hand.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::smooth_over_k;
use crate::classifier::FitKnn;
use crate::data::{build_neighbor_sets, NeighborMode};
use crate::error::Result;
use crate::metric::psd_project;
use crate::objective::{nca_objective, pnca_objective, AnnProblem, LossFn};
use crate::softagg::{soft_agg, solve_gamma_star, topk_avg_largest, topk_avg_smallest, Extreme, GammaStar};
use crate::types::{Dataset, HyperParams, MetricMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut ChaCha8Rng, usize) -> Result<Option<String>>;

const CHECKS: &[(&str, Check)] = &[
    (
        "soft aggregate lies in [min, max] and decreases in gamma",
        soft_agg_bounds,
    ),
    ("gamma* reproduces the top-K average", gamma_star),
    ("PSD projection is PSD and idempotent", projection),
    ("objective gradient matches central differences", gradient),
    ("PNCA with alpha = 1 equals NCA", pnca_nca),
    (
        "1-NN prediction matches brute force and ignores metric scale",
        classifier,
    ),
    ("K smoothing equals a sliding mean", smoothing),
];

/// Runs every check with `cases` random instances each.
pub fn run_selftest(seed: u64, cases: usize) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (passed, detail) = match check(&mut rng, cases) {
                Ok(None) => (true, format!("{cases} cases")),
                Ok(Some(msg)) => (false, msg),
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

fn random_list(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: usize) -> Result<Dataset> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n).map(|i| 1 + i % classes).collect();
    Dataset::from_rows(&rows, labels)
}

fn random_pd(rng: &mut ChaCha8Rng, d: usize) -> Result<MetricMatrix> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    MetricMatrix::new(&a * a.transpose() + DMatrix::identity(d, d) * 0.1)
}

fn soft_agg_bounds(rng: &mut ChaCha8Rng, cases: usize) -> Result<Option<String>> {
    for _ in 0..cases {
        let n = rng.gen_range(2..10);
        let v = random_list(rng, n);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut prev = f64::INFINITY;
        for g in [-50.0, -1.0, -0.01, 0.01, 1.0, 50.0] {
            let b = soft_agg(&v, g)?;
            if b < lo - 1e-12 || b > hi + 1e-12 || b > prev + 1e-12 {
                return Ok(Some(format!("{v:?} at gamma {g}: {b}")));
            }
            prev = b;
        }
    }
    Ok(None)
}

fn gamma_star(rng: &mut ChaCha8Rng, cases: usize) -> Result<Option<String>> {
    for _ in 0..cases {
        let n = rng.gen_range(2..10);
        let v = random_list(rng, n);
        for k in 1..n {
            for mode in [Extreme::Smallest, Extreme::Largest] {
                let target = match mode {
                    Extreme::Smallest => topk_avg_smallest(&v, k)?,
                    Extreme::Largest => topk_avg_largest(&v, k)?,
                };
                let GammaStar::Finite(g) = solve_gamma_star(&v, k, mode)? else {
                    return Ok(Some(format!("{v:?} k={k}: no finite root")));
                };
                let b = soft_agg(&v, g)?;
                if (b - target).abs() > 1e-8 * (1.0 + target.abs()) {
                    return Ok(Some(format!("{v:?} k={k}: {b} vs {target}")));
                }
            }
        }
    }
    Ok(None)
}

fn projection(rng: &mut ChaCha8Rng, cases: usize) -> Result<Option<String>> {
    for _ in 0..cases {
        let d = rng.gen_range(1..12);
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-3.0..3.0));
        let p = psd_project(&((&a + a.transpose()) * 0.5))?;
        let again = psd_project(p.as_matrix())?;
        let drift = (again.as_matrix() - p.as_matrix()).amax();
        if p.min_eigenvalue() < -1e-10 || drift > 1e-10 {
            return Ok(Some(format!("d={d}: min eig {}, drift {drift}", p.min_eigenvalue())));
        }
    }
    Ok(None)
}

fn gradient(rng: &mut ChaCha8Rng, cases: usize) -> Result<Option<String>> {
    let h = 1e-5;
    for c in 0..cases {
        let n = rng.gen_range(8..16);
        let d = rng.gen_range(1..5);
        let ds = random_dataset(rng, n, d, 2)?;
        let nbrs = build_neighbor_sets(&ds, NeighborMode::AllSameClass)?;
        let hp = HyperParams {
            alpha: if c % 2 == 0 { 2.0 } else { -2.0 },
            loss: if c % 3 == 0 {
                LossFn::Identity
            } else {
                LossFn::Softplus {
                    margin: 1.0,
                    sharpness: 2.0,
                }
            },
            lambda: 1.0 / (n * n) as f64,
            ..HyperParams::default()
        };
        let problem = AnnProblem::new(&ds, &nbrs, &hp)?;
        let m = random_pd(rng, d)?.into_matrix();
        let g = problem.gradient(&m)?;
        for a in 0..d {
            for b in a..d {
                let mut e = DMatrix::zeros(d, d);
                e[(a, b)] = h;
                e[(b, a)] = h;
                let fd = (problem.value(&(&m + &e))? - problem.value(&(&m - &e))?) / (2.0 * h);
                let an = if a == b { g[(a, a)] } else { g[(a, b)] + g[(b, a)] };
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                if rel > 1e-4 {
                    return Ok(Some(format!("entry ({a},{b}): analytic {an}, numeric {fd}")));
                }
            }
        }
    }
    Ok(None)
}

fn pnca_nca(rng: &mut ChaCha8Rng, cases: usize) -> Result<Option<String>> {
    for _ in 0..cases {
        let n = rng.gen_range(6..20);
        let d = rng.gen_range(1..5);
        let ds = random_dataset(rng, n, d, 3)?;
        let nbrs = build_neighbor_sets(&ds, NeighborMode::AllSameClass)?;
        let m = random_pd(rng, d)?;
        let (p, q) = (pnca_objective(&m, &ds, &nbrs, 1.0)?, nca_objective(&m, &ds)?);
        if (p - q).abs() > 1e-10 * n as f64 {
            return Ok(Some(format!("PNCA {p} vs NCA {q}")));
        }
    }
    Ok(None)
}

fn classifier(rng: &mut ChaCha8Rng, cases: usize) -> Result<Option<String>> {
    for _ in 0..cases {
        let n = rng.gen_range(4..20);
        let d = rng.gen_range(1..5);
        let ds = random_dataset(rng, n, d, 2)?;
        let m = random_pd(rng, d)?;
        let fit = FitKnn::new(ds.clone(), m.clone(), 1)?;
        let fit3 = FitKnn::new(ds.clone(), m.scaled(3.0)?, 1)?;
        let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let dist = fit.distances(&q)?;
        let nearest = (0..n).fold(0, |b, i| if dist[i] < dist[b] { i } else { b });
        let brute = ds.label(nearest);
        let (p1, p3) = (fit.predict(&q)?, fit3.predict(&q)?);
        if p1 != brute || p1 != p3 {
            return Ok(Some(format!(
                "query {q:?}: predicted {p1}, scaled {p3}, brute force {brute}"
            )));
        }
    }
    Ok(None)
}

fn smoothing(rng: &mut ChaCha8Rng, cases: usize) -> Result<Option<String>> {
    for _ in 0..cases {
        let len = rng.gen_range(5..30);
        let vals: Vec<f64> = (0..len).map(|_| rng.gen()).collect();
        let curve: BTreeMap<usize, f64> = vals.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect();
        let smooth = smooth_over_k(&curve);
        for (i, w) in vals.windows(5).enumerate() {
            let want = w.iter().sum::<f64>() / 5.0;
            if smooth.get(&i).is_none_or(|v| (v - want).abs() > 1e-12) {
                return Ok(Some(format!("K={i}: {:?} vs {want}", smooth.get(&i))));
            }
        }
        if smooth.len() != len - 4 {
            return Ok(Some(format!("{} smoothed points for {len} raw", smooth.len())));
        }
    }
    Ok(None)
}
