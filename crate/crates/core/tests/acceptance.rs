//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 4 5 6`.

use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use hdtest::asymptotics::{
    f_w_exact, power_limit_mc, sigma2_hdmss, sigma2_nw, GaussianProcessSpec, HypergeometricLaw, MomentConstants,
};
use hdtest::datagen::{generate, ExampleId, Innovation, ScenarioConfig, VDiag};
use hdtest::diagnostics::analytic_vxy_quadratic;
use hdtest::harness::{run_power_study, PowerTable, StudyConfig};
use hdtest::permutation::{factorial, randomization_distribution, s_w_cardinality, PermutationPlan};
use hdtest::statistic::ed_statistic_permuted;
use hdtest::{build_kernel_matrix, ed_statistic, seed, KernelFamily, KernelMatrix, KernelSpec, LabeledSample, Permutation};

const ALPHA: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rates(table: &PowerTable) -> String {
    table.rows.iter().map(|r| format!("{}={:.3}", r.kernel, r.rejection_rate)).collect::<Vec<_>>().join(" ")
}

fn study(sc: ScenarioConfig, reps: usize, seed: u64) -> StudyConfig {
    StudyConfig { replications: reps, permutations: 300, seed, alpha: ALPHA, ..StudyConfig::new(vec![sc]) }
}

/// Null size at desk scale.
fn criterion_1() -> Outcome {
    let sc = ScenarioConfig::new(ExampleId::Ex1, 200, 50, 50);
    let table = run_power_study(&study(sc, 1000, 101)).expect("study runs");
    let pass = table.rows.len() == 4
        && table.rows.iter().all(|r| r.is_ok() && (0.03..=0.08).contains(&r.rejection_rate));
    outcome(pass, format!("sizes {} (need each in [0.03, 0.08])", rates(&table)))
}

/// Only the L1 kernel detects a pure marginal difference.
fn criterion_2() -> Outcome {
    let sc = ScenarioConfig::new(ExampleId::Ex3i, 500, 70, 30).with_beta(1.0);
    let table = run_power_study(&study(sc, 300, 202)).expect("study runs");
    let rate = |k: KernelFamily| table.row(0, k).map_or(f64::NAN, |r| r.rejection_rate);
    let pass = rate(KernelFamily::L1) >= 0.8
        && [KernelFamily::L2, KernelFamily::Gaussian, KernelFamily::Laplacian].iter().all(|&k| rate(k) <= 0.15);
    outcome(pass, format!("rates {} (need l1 >= 0.8, others <= 0.15)", rates(&table)))
}

/// Matching bivariate margins leave every kernel at or below the level.
fn criterion_3() -> Outcome {
    let reps = 500;
    let sc = ScenarioConfig::new(ExampleId::Ex4ii, 500, 70, 30).with_beta(1.0);
    let table = run_power_study(&study(sc, reps, 303)).expect("study runs");
    let bound = ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / reps as f64).sqrt();
    let pass = table.rows.len() == 4 && table.rows.iter().all(|r| r.is_ok() && r.rejection_rate <= bound);
    outcome(pass, format!("rates {} (need each <= {bound:.4})", rates(&table)))
}

/// Pair-count form of sigma2_{n,w}, written independently of the library.
fn grouped_sigma2(n: usize, m: usize, w: usize, tx: f64, ty: f64, txy: f64) -> f64 {
    let (nf, mf, wf) = (n as f64, m as f64, w as f64);
    let c2 = |k: f64| k * (k - 1.0) / 2.0;
    4.0 / (nf * nf * (nf - 1.0).powi(2)) * (c2(nf - wf) * tx + c2(wf) * ty + (nf - wf) * wf * txy)
        + 4.0 / (mf * mf * (mf - 1.0).powi(2)) * (c2(wf) * tx + c2(mf - wf) * ty + wf * (mf - wf) * txy)
        + 4.0 / (nf * nf * mf * mf) * ((nf - wf) * wf * tx + wf * (mf - wf) * ty + ((nf - wf) * (mf - wf) + wf * wf) * txy)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::rng(404);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for n in 2..=30 {
        for m in 2..=30 {
            let family = KernelFamily::ALL[rng.random_range(0..4)];
            let spec = KernelSpec::new(family, rng.random_range(0.5..3.0)).unwrap();
            let mut draw = |lo: f64| rng.random_range(lo..5.0);
            let c = MomentConstants::new(draw(0.1), draw(0.1), draw(0.1), draw(0.0), draw(0.0), draw(0.0)).unwrap();
            let g = |v: f64, e: f64| v * spec.phi_prime(e).unwrap().powi(2);
            let (tx, ty, txy) = (g(c.v_x, c.e_x), g(c.v_y, c.e_y), g(c.v_xy, c.e_xy));
            for w in 0..=n.min(m) {
                let a = sigma2_nw(n, m, w, &c, &spec).unwrap();
                let b = grouped_sigma2(n, m, w, tx, ty, txy);
                worst = worst.max(((a - b) / b).abs());
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 1.0, format!("{checked} cases, max relative error {worst:.2e} in {secs:.3}s"))
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    for n in 1..=8usize {
        for m in 1..=8usize {
            let law = HypergeometricLaw::new(n, m).unwrap();
            let total = factorial(n + m);
            let mut sum = BigUint::zero();
            for w in law.support() {
                let card = s_w_cardinality(n, m, w).unwrap();
                let scaled = law.pmf_exact(w) * BigRational::from_integer(total.clone().into());
                ok &= scaled == BigRational::from_integer(card.clone().into());
                sum += card;
            }
            ok &= sum == total;
        }
    }
    let mut rng = seed::rng(505);
    let data: Vec<f64> = (0..6 * 4).map(|_| rng.random::<f64>()).collect();
    let sample = LabeledSample::from_flat(data, 3, 3, 4).unwrap();
    let km = build_kernel_matrix(&sample, &KernelSpec::l2()).unwrap();
    let dist = randomization_distribution(&km, &PermutationPlan::exact()).unwrap();
    let expected: Vec<u64> = (0..=3).map(|w| s_w_cardinality(3, 3, w).unwrap().try_into().unwrap()).collect();
    let hist_ok = dist.w_histogram() == expected.as_slice();
    outcome(
        ok && hist_ok,
        format!("pmf/|S_w| identities for n,m <= 8: {ok}; n=m=3 histogram {:?} vs {expected:?}", dist.w_histogram()),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = seed::rng(606);
    let plan = PermutationPlan::exact();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut values = vec![0.0; 36];
        for i in 0..6 {
            for j in i + 1..6 {
                let v = rng.random_range(-3.0..3.0);
                values[i * 6 + j] = v;
                values[j * 6 + i] = v;
            }
        }
        let km = KernelMatrix::from_symmetric(values, 3, 3).unwrap();
        let dist = randomization_distribution(&km, &plan).unwrap();
        worst = worst.max(dist.mean().abs());
    }
    let mut exact_ok = true;
    for n in 2..=12 {
        for m in 2..=12 {
            let law = HypergeometricLaw::new(n, m).unwrap();
            let mean: BigRational = law.support().map(|w| law.pmf_exact(w) * f_w_exact(n, m, w).unwrap()).sum();
            exact_ok &= mean.is_zero();
        }
    }
    outcome(
        worst <= 1e-12 && exact_ok,
        format!("max |mean| over 100 matrices {worst:.2e}; E_W f(W) = 0 exactly for n,m <= 12: {exact_ok}"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = seed::rng(707);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=20);
        let m = rng.random_range(2..=40 - n);
        let p = rng.random_range(1..=10);
        let spec = KernelSpec::new(KernelFamily::ALL[rng.random_range(0..4)], rng.random_range(0.5..2.0)).unwrap();
        let data: Vec<f64> = (0..(n + m) * p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let sample = LabeledSample::from_flat(data, n, m, p).unwrap();
        let perm = Permutation::random(n + m, &mut rng);
        let weighted = ed_statistic_permuted(&build_kernel_matrix(&sample, &spec).unwrap(), &perm).unwrap();
        let physical = ed_statistic(&build_kernel_matrix(&sample.permute_rows(&perm).unwrap(), &spec).unwrap());
        let scale = weighted.abs().max(physical.abs());
        if scale > 0.0 {
            worst = worst.max((weighted - physical).abs() / scale);
        }
    }
    outcome(worst <= 1e-12, format!("max relative difference {worst:.2e} over 1000 pairs"))
}

/// Kolmogorov-Smirnov distance of `sqrt(nmp) ED` from its Gaussian limit.
fn criterion_8() -> Outcome {
    let (n, m, p, reps) = (100usize, 100usize, 400usize, 2000usize);
    let spec = KernelSpec::l2();
    let eye = nalgebra::DMatrix::<f64>::identity(p, p);
    let v = analytic_vxy_quadratic(&eye, &eye).unwrap();
    let c = MomentConstants::new(2.0, 2.0, 2.0, v, v, v).unwrap();
    let sigma2 = sigma2_hdmss(1.0, &c, &spec).unwrap();
    let scale = ((n * m * p) as f64).sqrt();
    let mut stats: Vec<f64> = (0..reps)
        .map(|r| {
            // Example 3 with beta = 0 is i.i.d. N(0, 1) in every coordinate
            let cfg = ScenarioConfig::new(ExampleId::Ex3i, p, n, m).with_seed(seed::derive(808, &[r as u64]));
            let sample = generate(&cfg).unwrap();
            scale * ed_statistic(&build_kernel_matrix(&sample, &spec).unwrap())
        })
        .collect();
    stats.sort_by(|a, b| a.total_cmp(b));
    let normal = Normal::new(0.0, sigma2.sqrt()).unwrap();
    let k = reps as f64;
    let ks = stats
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / k).abs().max(((i + 1) as f64 / k - f).abs())
        })
        .fold(0.0, f64::max);
    outcome(ks < 0.05, format!("KS distance {ks:.4} against N(0, {sigma2:.4}) (need < 0.05)"))
}

fn criterion_9() -> Outcome {
    let draws = 20_000;
    let gp = GaussianProcessSpec { n: 3, m: 3, v_xy: 1.0, v_x: 1.0, v_y: 1.0 };
    let est = power_limit_mc(&gp, ALPHA, &PermutationPlan::exact().with_seed(909), draws).unwrap();
    let bound = ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / draws as f64).sqrt();
    outcome(
        est.estimate <= bound,
        format!("power limit {:.4} (se {:.4}) (need <= {bound:.4})", est.estimate, est.standard_error),
    )
}

fn criterion_10() -> Outcome {
    let mut sc = ScenarioConfig::new(ExampleId::Ex2ii, 40, 12, 9).with_beta(0.5);
    sc.v_diag = VDiag::Uniform;
    sc.innovation = Innovation::Exponential;
    let cfg = StudyConfig {
        replications: 60,
        permutations: 50,
        seed: 1010,
        ..StudyConfig::new(vec![
            sc,
            ScenarioConfig::new(ExampleId::Ex4i, 30, 10, 10).with_beta(1.0),
            ScenarioConfig::new(ExampleId::Ex1, 25, 8, 11),
        ])
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_power_study(&cfg).unwrap().to_csv_string().unwrap())
    };
    let (a, b, c) = (run(1), run(8), run(8));
    outcome(a == b && b == c, format!("{} bytes; jobs 1 vs 8 identical: {}; repeat identical: {}", a.len(), a == b, b == c))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "null size at desk scale", criterion_1),
        (2, "marginal-difference power separation", criterion_2),
        (3, "trivial power under matching bivariate margins", criterion_3),
        (4, "variance formula cross-check", criterion_4),
        (5, "enumeration identities", criterion_5),
        (6, "randomization mean zero", criterion_6),
        (7, "weight/row permutation equivalence", criterion_7),
        (8, "asymptotic normality", criterion_8),
        (9, "power-limit oracle at the level", criterion_9),
        (10, "determinism across thread counts", criterion_10),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (k, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} {verdict} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
