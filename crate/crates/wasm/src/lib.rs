//! Browser bindings for the demo page in `www/`.
//!
//! Each exported function takes plain numbers and strings and returns a JSON
//! string. The `*_json` functions hold the logic and run natively in tests.

use hdtest::asymptotics::{f_w, mu_nw, sigma2_nw, HypergeometricLaw, MomentConstants};
use hdtest::datagen::{generate, ExampleId, ScenarioConfig};
use hdtest::harness::{run_power_study, StudyConfig};
use hdtest::permutation::{randomization_distribution, PermutationPlan, TestResult};
use hdtest::{build_kernel_matrix, ed_statistic, Error, KernelFamily, KernelSpec, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest sample the page will accept, to keep the tab responsive.
const MAX_ROWS: usize = 400;
const MAX_DIM: usize = 2000;

#[derive(Serialize)]
struct Bin {
    lo: f64,
    hi: f64,
    count: usize,
}

#[derive(Serialize)]
struct Histogram {
    statistic: f64,
    critical_value: f64,
    p_value: f64,
    reject: bool,
    permutations: usize,
    bins: Vec<Bin>,
}

#[derive(Serialize)]
struct AsymptoticRow {
    w: usize,
    f_w: f64,
    mu: f64,
    sigma2: f64,
    pmf: f64,
}

#[derive(Serialize)]
struct CurvePoint {
    beta: f64,
    rates: Vec<(String, f64)>,
}

fn check_size(p: usize, n: usize, m: usize) -> Result<()> {
    if n + m > MAX_ROWS || p > MAX_DIM {
        return Err(Error::Argument(format!("demo limits: n + m <= {MAX_ROWS}, p <= {MAX_DIM}")));
    }
    Ok(())
}

fn parse_example(s: &str) -> Result<ExampleId> {
    s.parse()
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)?)
}

/// Generates one sample, runs the permutation test and bins the
/// randomization distribution into `bins` equal-width buckets.
#[allow(clippy::too_many_arguments)]
pub fn randomization_histogram_json(
    example: &str,
    p: usize,
    n: usize,
    m: usize,
    beta: f64,
    kernel: &str,
    gamma: f64,
    permutations: usize,
    seed: u64,
    bins: usize,
) -> Result<String> {
    check_size(p, n, m)?;
    if bins == 0 {
        return Err(Error::Argument("need at least one bin".into()));
    }
    let cfg = ScenarioConfig::new(parse_example(example)?, p, n, m).with_beta(beta).with_seed(seed);
    let sample = generate(&cfg)?;
    let spec = KernelSpec::new(kernel.parse::<KernelFamily>()?, gamma)?;
    let km = build_kernel_matrix(&sample, &spec)?;
    let dist = randomization_distribution(&km, &PermutationPlan::monte_carlo(permutations, seed))?;
    let result = TestResult::from_distribution(ed_statistic(&km), &dist, 0.05)?;

    let values = dist.values();
    let lo = values.iter().copied().fold(result.statistic, f64::min);
    let hi = values.iter().copied().fold(result.statistic, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| Bin { lo: lo + k as f64 * width, hi: lo + (k + 1) as f64 * width, count })
        .collect();
    to_json(&Histogram {
        statistic: result.statistic,
        critical_value: result.critical_value,
        p_value: result.p_value,
        reject: result.reject,
        permutations: dist.count(),
        bins,
    })
}

/// Limit mean and variance of the permuted statistic for each value of W.
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_table_json(
    n: usize,
    m: usize,
    e_x: f64,
    e_y: f64,
    e_xy: f64,
    v_x: f64,
    v_y: f64,
    v_xy: f64,
    kernel: &str,
    gamma: f64,
) -> Result<String> {
    let c = MomentConstants::new(e_x, e_y, e_xy, v_x, v_y, v_xy)?;
    let spec = KernelSpec::new(kernel.parse::<KernelFamily>()?, gamma)?;
    let law = HypergeometricLaw::new(n, m)?;
    let rows = law
        .support()
        .map(|w| {
            Ok(AsymptoticRow {
                w,
                f_w: f_w(n, m, w)?,
                mu: mu_nw(n, m, w, &c, &spec)?,
                sigma2: sigma2_nw(n, m, w, &c, &spec)?,
                pmf: law.pmf(w),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    to_json(&rows)
}

/// Rejection rate of every kernel at each beta in `betas`.
#[allow(clippy::too_many_arguments)]
pub fn power_curve_json(
    example: &str,
    p: usize,
    n: usize,
    m: usize,
    betas: &[f64],
    replications: usize,
    permutations: usize,
    seed: u64,
) -> Result<String> {
    check_size(p, n, m)?;
    let id = parse_example(example)?;
    let scenarios = betas.iter().map(|&b| ScenarioConfig::new(id, p, n, m).with_beta(b)).collect();
    let cfg = StudyConfig { replications, permutations, seed, ..StudyConfig::new(scenarios) };
    let table = run_power_study(&cfg)?;
    let points: Vec<CurvePoint> = betas
        .iter()
        .enumerate()
        .map(|(g, &beta)| CurvePoint {
            beta,
            rates: table.rows.iter().filter(|r| r.grid == g).map(|r| (r.kernel.clone(), r.rejection_rate)).collect(),
        })
        .collect();
    to_json(&points)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn randomization_histogram(
    example: &str,
    p: usize,
    n: usize,
    m: usize,
    beta: f64,
    kernel: &str,
    gamma: f64,
    permutations: usize,
    seed: u32,
    bins: usize,
) -> std::result::Result<String, JsError> {
    js(randomization_histogram_json(example, p, n, m, beta, kernel, gamma, permutations, seed.into(), bins))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_table(
    n: usize,
    m: usize,
    e_x: f64,
    e_y: f64,
    e_xy: f64,
    v_x: f64,
    v_y: f64,
    v_xy: f64,
    kernel: &str,
    gamma: f64,
) -> std::result::Result<String, JsError> {
    js(asymptotic_table_json(n, m, e_x, e_y, e_xy, v_x, v_y, v_xy, kernel, gamma))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn power_curve(
    example: &str,
    p: usize,
    n: usize,
    m: usize,
    betas: Vec<f64>,
    replications: usize,
    permutations: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    js(power_curve_json(example, p, n, m, &betas, replications, permutations, seed.into()))
}
