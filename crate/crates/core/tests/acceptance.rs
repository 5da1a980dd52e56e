//! Acceptance suite. Each test writes one `PASS`/`FAIL` line to stderr
//! (bypassing libtest's capture) and then asserts the same verdict.
//! Tests hold a shared lock so the timing measurements don't overlap.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use adaptive_nn::bench::{load_config, run_experiment, Method};
use adaptive_nn::classifier::FitKnn;
use adaptive_nn::data::{build_neighbor_sets, NeighborMode};
use adaptive_nn::metric::psd_project;
use adaptive_nn::objective::{nca_objective, pnca_objective, AnnProblem, LossFn};
use adaptive_nn::optimizer::{default_init, train, STEP_GROWTH, STEP_SHRINK};
use adaptive_nn::softagg::{soft_agg, solve_gamma_star, Extreme, GammaStar};
use adaptive_nn::{Dataset, HyperParams, MetricMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn verdict(id: u32, title: &str, ok: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "{} criterion {id:>2}: {title} ({detail}; {:.2} s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {id}: {title}: {detail}");
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n).map(|i| 1 + i % classes).collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let rank = rng.gen_range(1..=d);
    let a = DMatrix::from_fn(d, rank, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose()
}

fn random_pd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    random_psd(rng, d) + DMatrix::identity(d, d) * 0.05
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).collect()
}

#[test]
fn criterion_01_soft_aggregate_limits() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_extreme, mut worst_mean) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.gen_range(2..=10);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = v.iter().sum::<f64>() / n as f64;
        let g = 1e3 / (hi - lo);
        worst_extreme = worst_extreme.max((soft_agg(&v, g).unwrap() - lo).abs());
        worst_extreme = worst_extreme.max((soft_agg(&v, -g).unwrap() - hi).abs());
        worst_mean = worst_mean.max((soft_agg(&v, 1e-8).unwrap() - mean).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst_extreme <= 1e-6 && worst_mean <= 1e-6 && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "soft aggregate tends to min/max/mean",
        ok,
        &format!("max |b - min or max| = {worst_extreme:.3e}, max |b - mean| = {worst_mean:.3e}, tolerance 1e-6"),
        elapsed,
    );
}

#[test]
fn criterion_02_gamma_star_solver() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut solved = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=10);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        for k in 1..v.len() {
            for mode in [Extreme::Smallest, Extreme::Largest] {
                let target = match mode {
                    Extreme::Smallest => sorted[..k].iter().sum::<f64>() / k as f64,
                    Extreme::Largest => sorted[sorted.len() - k..].iter().sum::<f64>() / k as f64,
                };
                solved += 1;
                match solve_gamma_star(&v, k, mode).unwrap() {
                    GammaStar::Finite(g) => {
                        let r = (soft_agg(&v, g).unwrap() - target).abs() / (1.0 + target.abs());
                        worst = worst.max(r);
                        if r > 1e-8 {
                            failures += 1;
                        }
                    }
                    _ => failures += 1,
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = failures == 0 && elapsed < Duration::from_secs(5);
    verdict(
        2,
        "gamma* reproduces top-K averages",
        ok,
        &format!("{solved} roots, {failures} failures, worst scaled residual {worst:.2e}"),
        elapsed,
    );
}

#[test]
fn criterion_03_gradient_check() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut entries = 0;
    for inst in 0..20 {
        let n = rng.gen_range(8..=25);
        let d = rng.gen_range(1..=6);
        let classes = rng.gen_range(2..=3);
        let ds = random_dataset(&mut rng, n, d, classes);
        let mode = if inst % 5 < 2 {
            NeighborMode::AllSameClass
        } else {
            NeighborMode::KnnSameClass(3)
        };
        let nbrs = build_neighbor_sets(&ds, mode).unwrap();
        let hp = HyperParams {
            alpha: if inst % 4 < 2 { 2.0 } else { -2.0 },
            gamma: rng.gen_range(0.5..2.0),
            lambda: if inst % 3 == 0 { 0.0 } else { 1.0 / (n * n) as f64 },
            loss: if inst % 2 == 0 {
                LossFn::Identity
            } else {
                LossFn::Softplus {
                    margin: 1.0,
                    sharpness: 1.5,
                }
            },
            ..HyperParams::default()
        };
        let problem = AnnProblem::new(&ds, &nbrs, &hp).unwrap();
        let m = random_pd(&mut rng, d);
        let g = problem.gradient(&m).unwrap();
        for a in 0..d {
            for b in a..d {
                // perturb the symmetric pair so M stays symmetric
                let mut e = DMatrix::zeros(d, d);
                e[(a, b)] = h;
                e[(b, a)] = h;
                let fd = (problem.value(&(&m + &e)).unwrap() - problem.value(&(&m - &e)).unwrap()) / (2.0 * h);
                let an = if a == b { g[(a, a)] } else { g[(a, b)] + g[(b, a)] };
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                worst = worst.max(rel);
                entries += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-4 && elapsed < Duration::from_secs(30);
    verdict(
        3,
        "analytic gradient matches central differences",
        ok,
        &format!("{entries} entries, worst relative error {worst:.2e}"),
        elapsed,
    );
}

#[test]
fn criterion_04_convexity_for_negative_alpha() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let ds = random_dataset(&mut rng, 20, 4, 2);
    let nbrs = build_neighbor_sets(&ds, NeighborMode::AllSameClass).unwrap();
    let hp = HyperParams {
        alpha: -2.0,
        loss: LossFn::Identity,
        lambda: 1.0 / 400.0,
        ..HyperParams::default()
    };
    let problem = AnnProblem::new(&ds, &nbrs, &hp).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let a = random_psd(&mut rng, 4) * rng.gen_range(0.1..3.0);
        let b = random_psd(&mut rng, 4) * rng.gen_range(0.1..3.0);
        let ja = problem.value(&a).unwrap();
        let jb = problem.value(&b).unwrap();
        let jm = problem.value(&((&a + &b) * 0.5)).unwrap();
        let slack = jm - 0.5 * (ja + jb) - 1e-8 * (1.0 + jm.abs());
        worst = worst.max(slack);
    }
    let elapsed = start.elapsed();
    let ok = worst <= 0.0 && elapsed < Duration::from_secs(30);
    verdict(
        4,
        "objective is midpoint convex for alpha < 0",
        ok,
        &format!("100 triples, largest J(mid) - mean(J) - tol = {worst:.3e}"),
        elapsed,
    );
}

/// NCA computed straight from the definition, without any stabilization.
fn naive_nca(m: &DMatrix<f64>, ds: &Dataset) -> f64 {
    let dist = |i: usize, j: usize| {
        let diff: Vec<f64> = ds.row(i).iter().zip(ds.row(j)).map(|(a, b)| a - b).collect();
        let v = nalgebra::DVector::from_vec(diff);
        (v.transpose() * m * &v)[(0, 0)]
    };
    (0..ds.len())
        .map(|i| {
            let others: Vec<usize> = (0..ds.len()).filter(|&k| k != i).collect();
            let z: f64 = others.iter().map(|&k| (-dist(i, k)).exp()).sum();
            others
                .iter()
                .filter(|&&k| ds.label(k) == ds.label(i))
                .map(|&k| (-dist(i, k)).exp())
                .sum::<f64>()
                / z
        })
        .sum()
}

#[test]
fn criterion_05_pnca_reduces_to_nca() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0f64;
    let mut worst_naive = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(6..=30);
        let d = rng.gen_range(1..=5);
        let classes = rng.gen_range(2..=4);
        let ds = random_dataset(&mut rng, n, d, classes);
        let nbrs = build_neighbor_sets(&ds, NeighborMode::AllSameClass).unwrap();
        let m = random_pd(&mut rng, d);
        let metric = MetricMatrix::new(m.clone()).unwrap();
        let p = pnca_objective(&metric, &ds, &nbrs, 1.0).unwrap();
        let q = nca_objective(&metric, &ds).unwrap();
        worst = worst.max((p - q).abs() / n as f64);
        worst_naive = worst_naive.max((q - naive_nca(&m, &ds)).abs() / n as f64);
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-10 && worst_naive <= 1e-10 && elapsed < Duration::from_secs(5);
    verdict(
        5,
        "PNCA with alpha = 1 equals NCA",
        ok,
        &format!("max |PNCA - NCA| / N = {worst:.2e}, max |NCA - direct| / N = {worst_naive:.2e}"),
        elapsed,
    );
}

#[test]
fn criterion_06_psd_projection() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let (mut min_eig, mut drift, mut oracle_gap) = (f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let d = rng.gen_range(1..=20);
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-2.0..2.0));
        let sym = (&a + a.transpose()) * 0.5;
        let p = psd_project(&sym).unwrap();
        min_eig = min_eig.min(
            jacobi_eigenvalues(p.as_matrix())
                .into_iter()
                .fold(f64::INFINITY, f64::min),
        );
        drift = drift.max((psd_project(p.as_matrix()).unwrap().as_matrix() - p.as_matrix()).amax());
        // the projection keeps exactly the positive part of the spectrum
        let mut want: Vec<f64> = jacobi_eigenvalues(&sym).into_iter().map(|v| v.max(0.0)).collect();
        let mut got = jacobi_eigenvalues(p.as_matrix());
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        oracle_gap = oracle_gap.max(want.iter().zip(&got).map(|(w, g)| (w - g).abs()).fold(0.0, f64::max));
    }
    let elapsed = start.elapsed();
    let ok = min_eig >= -1e-10 && drift <= 1e-10 && oracle_gap <= 1e-9 && elapsed < Duration::from_secs(5);
    verdict(
        6,
        "PSD projection is PSD and idempotent",
        ok,
        &format!("min eigenvalue {min_eig:.2e}, idempotence drift {drift:.2e}, spectrum gap {oracle_gap:.2e}"),
        elapsed,
    );
}

#[test]
fn criterion_07_optimizer_contract() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let ds = random_dataset(&mut rng, 30, 3, 3);
    let nbrs = build_neighbor_sets(&ds, NeighborMode::AllSameClass).unwrap();
    let hp = HyperParams {
        alpha: 2.0,
        gamma: 1.0,
        lambda: 1.0 / 900.0,
        loss: LossFn::Softplus {
            margin: 1.0,
            sharpness: 1.0,
        },
        max_iters: 150,
        eta0: 5.0,
        ..HyperParams::default()
    };
    let report = train(&ds, &nbrs, &hp, &default_init(&ds)).unwrap();
    let mut problems = Vec::new();
    let mut eta = hp.eta0;
    let mut best = report.initial_objective;
    for e in &report.objective_trace {
        if e.eta != eta {
            problems.push(format!("iteration {}: eta {} expected {}", e.iteration, e.eta, eta));
        }
        if e.accepted != (e.objective < best) {
            problems.push(format!("iteration {}: acceptance flag wrong", e.iteration));
        }
        if e.accepted {
            best = e.objective;
            eta *= STEP_GROWTH;
        } else {
            eta *= STEP_SHRINK;
        }
    }
    let accepted: Vec<f64> = report.accepted_objectives().collect();
    if accepted.windows(2).any(|w| w[1] >= w[0]) || accepted.first().is_some_and(|&j| j >= report.initial_objective) {
        problems.push("accepted objectives not strictly decreasing".into());
    }
    let rejected = report.objective_trace.len() - accepted.len();
    if accepted.is_empty() || rejected == 0 {
        problems.push(format!(
            "trace does not exercise both branches ({} accepted, {rejected} rejected)",
            accepted.len()
        ));
    }
    let elapsed = start.elapsed();
    let ok = problems.is_empty() && elapsed < Duration::from_secs(10);
    verdict(
        7,
        "accepted objectives decrease and step sizes follow the rule",
        ok,
        &if problems.is_empty() {
            format!(
                "{} iterations, {} accepted, {rejected} rejected",
                report.iterations_run,
                accepted.len()
            )
        } else {
            problems.join("; ")
        },
        elapsed,
    );
}

#[test]
fn criterion_08_desk_scale_benchmarks() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfgs = load_config(&path).unwrap();
    let find = |ds: &str, m: Method| cfgs.iter().find(|c| c.dataset == ds && c.method == m).unwrap().clone();
    let mut ok = true;
    let mut parts = Vec::new();
    for (ds, method, floor) in [("iris", Method::AnnPlus, 0.93), ("wine", Method::AnnMinus, 0.92)] {
        let ann = run_experiment(&find(ds, method)).unwrap();
        let base = run_experiment(&find(ds, Method::EuclideanBaseline)).unwrap();
        let pass = ann.mean >= floor && ann.mean >= base.mean - 0.01 && ann.wall_time_seconds < 300.0;
        ok &= pass;
        parts.push(format!(
            "{ds} {}: {:.2} ± {:.2} % over {} reps in {:.0} s (floor {:.0} %, baseline {:.2} %)",
            method.name(),
            100.0 * ann.mean,
            100.0 * ann.std,
            ann.repetitions.len(),
            ann.wall_time_seconds,
            100.0 * floor,
            100.0 * base.mean
        ));
    }
    verdict(8, "desk-scale accuracy", ok, &parts.join("; "), start.elapsed());
}

#[test]
fn criterion_09_classifier_oracles() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut mismatches = 0;
    let mut scale_changes = 0;
    for _ in 0..50 {
        let n = rng.gen_range(4..=30);
        let d = rng.gen_range(1..=5);
        let classes = rng.gen_range(2..=4).min(n / 2);
        let ds = random_dataset(&mut rng, n, d, classes);
        let m = random_pd(&mut rng, d);
        let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let brute = (0..n)
            .map(|i| {
                let v = nalgebra::DVector::from_iterator(d, ds.row(i).iter().zip(&q).map(|(a, b)| a - b));
                ((v.transpose() * &m * &v)[(0, 0)], i)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        let fit = FitKnn::new(ds.clone(), MetricMatrix::new(m.clone()).unwrap(), 1).unwrap();
        if fit.predict(&q).unwrap() != ds.label(brute) {
            mismatches += 1;
        }
        let k = rng.gen_range(1..=5);
        let a = FitKnn::new(ds.clone(), MetricMatrix::new(m.clone()).unwrap(), k).unwrap();
        let b = FitKnn::new(ds.clone(), MetricMatrix::new(m * 3.0).unwrap(), k).unwrap();
        if a.predict(&q).unwrap() != b.predict(&q).unwrap() {
            scale_changes += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && scale_changes == 0 && elapsed < Duration::from_secs(5);
    verdict(
        9,
        "K-NN prediction matches brute force and ignores metric scale",
        ok,
        &format!("{mismatches} 1-NN mismatches, {scale_changes} changes under M -> 3M over 50 cases"),
        elapsed,
    );
}

#[test]
fn criterion_10_gradient_cost_scaling() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let d = 6;
    let sizes = [50usize, 100, 200];
    let mut times = Vec::new();
    for &n in &sizes {
        let ds = random_dataset(&mut rng, n, d, 2);
        let nbrs = build_neighbor_sets(&ds, NeighborMode::AllSameClass).unwrap();
        let hp = HyperParams {
            alpha: 2.0,
            loss: LossFn::Identity,
            lambda: 1.0 / (n * n) as f64,
            ..HyperParams::default()
        };
        let problem = AnnProblem::new(&ds, &nbrs, &hp).unwrap();
        let m = random_pd(&mut rng, d);
        // best of several batches, each long enough to swamp timer noise
        let mut best = f64::INFINITY;
        for _ in 0..7 {
            let reps = (200_000 / (n * n)).max(3);
            let t = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(problem.gradient(std::hint::black_box(&m)).unwrap());
            }
            best = best.min(t.elapsed().as_secs_f64() / reps as f64);
        }
        times.push(best);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let ok = (1.7..=2.3).contains(&slope);
    verdict(
        10,
        "gradient cost grows quadratically in N",
        ok,
        &format!(
            "log-log slope {slope:.2}; per-call {:.1} / {:.1} / {:.1} µs at N = 50 / 100 / 200",
            times[0] * 1e6,
            times[1] * 1e6,
            times[2] * 1e6
        ),
        start.elapsed(),
    );
}
