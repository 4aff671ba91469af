//! Monte Carlo size and power studies over scenario grids and real data.
//!
//! Every random draw is keyed by `(master seed, grid index, replication)`, and
//! results are gathered in index order, so a study writes the same bytes no
//! matter how many worker threads ran it.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::datagen::{ExampleId, Scenario, ScenarioConfig, VDiag};
use crate::error::{Error, Result};
use crate::io::{load_delimited, DelimitedFormat, RealDataset};
use crate::kernels::{KernelFamily, KernelSpec, Psi, DEFAULT_BANDWIDTH};
use crate::permutation::{distribution_over, PermutationPlan, TestResult, DEFAULT_PERMUTATIONS};
use crate::seed::{self, tag};
use crate::statistic::{Grouping, KernelMatrix, LabeledSample, PsiBarMatrix};

pub const MIN_PERMUTATIONS: usize = 20;
pub const DEFAULT_REPLICATIONS: usize = 1000;

fn default_kernels() -> Vec<KernelFamily> {
    KernelFamily::ALL.to_vec()
}
fn default_gamma() -> f64 {
    DEFAULT_BANDWIDTH
}
fn default_alpha() -> f64 {
    0.05
}
fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}
fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

/// Real-data entry of a study: two classes of a delimited file, subsampled
/// at each size in `sizes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealDataSource {
    pub file: PathBuf,
    pub format: DelimitedFormat,
    pub sizes: Vec<usize>,
    /// Labels of the two classes; the first two labels in the file if absent.
    #[serde(default)]
    pub classes: Option<(String, String)>,
    /// Draw both groups from the first class (a null-by-construction run).
    #[serde(default)]
    pub null_control: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default)]
    pub realdata: Option<RealDataSource>,
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelFamily>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Adds a per-row compute time column. Off by default since timings
    /// break byte-for-byte reproducibility.
    #[serde(default)]
    pub record_time: bool,
}

impl StudyConfig {
    pub fn new(scenarios: Vec<ScenarioConfig>) -> Self {
        StudyConfig {
            scenarios,
            realdata: None,
            kernels: default_kernels(),
            gamma: default_gamma(),
            alpha: default_alpha(),
            replications: default_replications(),
            permutations: default_permutations(),
            seed: 0,
            out: None,
            record_time: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::arg("replications must be at least 1"));
        }
        if self.permutations < MIN_PERMUTATIONS {
            return Err(Error::arg(format!(
                "permutations must be at least {MIN_PERMUTATIONS}, got {}",
                self.permutations
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::arg(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.kernels.is_empty() {
            return Err(Error::arg("no kernels selected"));
        }
        self.specs()?;
        if self.scenarios.is_empty() && self.realdata.is_none() {
            return Err(Error::arg("study has neither scenarios nor a real-data source"));
        }
        for (g, sc) in self.scenarios.iter().enumerate() {
            sc.validate().map_err(|e| Error::arg(format!("scenario {g}: {e}")))?;
        }
        if let Some(rd) = &self.realdata {
            if rd.sizes.is_empty() || rd.sizes.iter().any(|&n| n < 2) {
                return Err(Error::arg("real-data sizes must be a nonempty list of values >= 2"));
            }
        }
        Ok(())
    }

    pub fn specs(&self) -> Result<Vec<KernelSpec>> {
        self.kernels.iter().map(|&f| KernelSpec::new(f, self.gamma)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub grid: usize,
    pub scenario: String,
    pub kernel: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub replications: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mc_standard_error: f64,
    /// `ok`, or `failed: <reason>` for a grid cell that could not run.
    pub status: String,
    pub time_s: Option<f64>,
}

impl PowerRow {
    fn completed(meta: &CellMeta, kernel: String, rejections: usize, time: Option<Duration>) -> Self {
        let r = meta.replications;
        let rate = rejections as f64 / r as f64;
        PowerRow {
            grid: meta.grid,
            scenario: meta.label.clone(),
            kernel,
            n: meta.n,
            m: meta.m,
            p: meta.p,
            replications: r,
            rejections,
            rejection_rate: rate,
            mc_standard_error: (rate * (1.0 - rate) / r as f64).sqrt(),
            status: "ok".into(),
            time_s: time.map(|d| d.as_secs_f64()),
        }
    }

    fn failed(meta: &CellMeta, kernel: String, err: &Error) -> Self {
        PowerRow {
            grid: meta.grid,
            scenario: meta.label.clone(),
            kernel,
            n: meta.n,
            m: meta.m,
            p: meta.p,
            replications: 0,
            rejections: 0,
            rejection_rate: f64::NAN,
            mc_standard_error: f64::NAN,
            status: format!("failed: {err}"),
            time_s: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Whether the rate lies within `k` Monte Carlo standard errors of `level`,
    /// with the standard error taken at `level`.
    pub fn within_se_of(&self, level: f64, k: f64) -> bool {
        let se = (level * (1.0 - level) / self.replications as f64).sqrt();
        self.is_ok() && (self.rejection_rate - level).abs() <= k * se
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
    pub include_time: bool,
}

impl PowerTable {
    const HEADER: [&'static str; 11] = [
        "grid",
        "scenario",
        "kernel",
        "n",
        "m",
        "p",
        "replications",
        "rejections",
        "rejection_rate",
        "mc_standard_error",
        "status",
    ];

    pub fn row(&self, grid: usize, kernel: KernelFamily) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.grid == grid && r.kernel == kernel.token())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = Self::HEADER.to_vec();
        if self.include_time {
            header.push("time_s");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.grid.to_string(),
                r.scenario.clone(),
                r.kernel.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.p.to_string(),
                r.replications.to_string(),
                r.rejections.to_string(),
                r.rejection_rate.to_string(),
                r.mc_standard_error.to_string(),
                r.status.clone(),
            ];
            if self.include_time {
                rec.push(r.time_s.map_or(String::new(), |t| format!("{t:.6}")));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

struct CellMeta {
    grid: usize,
    label: String,
    n: usize,
    m: usize,
    p: usize,
    replications: usize,
}

/// Result of one replication: a decision and compute time per kernel.
type Decisions = Vec<(bool, Duration)>;

// `Instant::now` panics on wasm32-unknown-unknown, so the clock only runs
// when timing was asked for.
fn clock(on: bool) -> Option<Instant> {
    on.then(Instant::now)
}

fn elapsed(start: Option<Instant>) -> Duration {
    start.map_or(Duration::ZERO, |s| s.elapsed())
}

/// Permutation tests for several kernels on one sample, sharing the `psi_bar`
/// matrices and the sampled groupings across kernels.
fn test_all_kernels(
    sample: &LabeledSample,
    specs: &[KernelSpec],
    alpha: f64,
    plan: &PermutationPlan,
    timed: bool,
) -> Result<Decisions> {
    let (n, m) = (sample.n(), sample.m());
    let groupings = plan.groupings(n, m)?;
    let identity = Grouping::identity(n, m);
    let mut psi_cache: Vec<(Psi, PsiBarMatrix)> = Vec::new();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let start = clock(timed);
        let psi = spec.psi();
        if !psi_cache.iter().any(|(p, _)| *p == psi) {
            psi_cache.push((psi, PsiBarMatrix::build(sample, psi)));
        }
        let pm = &psi_cache.iter().find(|(p, _)| *p == psi).expect("inserted above").1;
        let km = KernelMatrix::from_psi_bar(pm, n, m, spec)?;
        let dist = distribution_over(&km, &groupings, plan.summary(n, m));
        let result = TestResult::from_distribution(km.statistic_for(&identity), &dist, alpha)?;
        out.push((result.reject, elapsed(start)));
    }
    Ok(out)
}

fn aggregate(meta: &CellMeta, specs: &[KernelSpec], reps: Vec<Result<Decisions>>, record_time: bool) -> Vec<PowerRow> {
    let kernel_names: Vec<String> = specs.iter().map(|s| s.family.token().to_string()).collect();
    match reps.into_iter().collect::<Result<Vec<_>>>() {
        Err(e) => kernel_names.into_iter().map(|k| PowerRow::failed(meta, k, &e)).collect(),
        Ok(decisions) => kernel_names
            .into_iter()
            .enumerate()
            .map(|(k, name)| {
                let hits = decisions.iter().filter(|d| d[k].0).count();
                let time: Duration = decisions.iter().map(|d| d[k].1).sum();
                PowerRow::completed(meta, name, hits, record_time.then_some(time))
            })
            .collect(),
    }
}

fn replication_plan(cfg: &StudyConfig, grid: usize, rep: usize) -> PermutationPlan {
    PermutationPlan::monte_carlo(cfg.permutations, seed::derive(cfg.seed, &[grid as u64, rep as u64, tag::PERMUTATION]))
}

fn replication_rng(cfg: &StudyConfig, grid: usize, rep: usize) -> rand_chacha::ChaCha8Rng {
    seed::rng(seed::derive(cfg.seed, &[grid as u64, rep as u64, tag::DATA]))
}

/// Rejection rates for every scenario and kernel of `cfg`.
pub fn run_power_study(cfg: &StudyConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let specs = cfg.specs()?;
    let mut table = PowerTable { rows: Vec::new(), include_time: cfg.record_time };
    for (g, sc) in cfg.scenarios.iter().enumerate() {
        let meta = CellMeta { grid: g, label: sc.label(), n: sc.n, m: sc.m, p: sc.p, replications: cfg.replications };
        let mut population = sc.clone();
        population.seed = seed::derive(cfg.seed, &[g as u64, tag::POPULATION, sc.seed]);
        let reps = match Scenario::new(population) {
            Ok(scenario) => crate::par::map_indexed(cfg.replications, |r| {
                let sample = scenario.draw(&mut replication_rng(cfg, g, r))?;
                test_all_kernels(&sample, &specs, cfg.alpha, &replication_plan(cfg, g, r), cfg.record_time)
            }),
            Err(e) => vec![Err(e)],
        };
        table.rows.extend(aggregate(&meta, &specs, reps, cfg.record_time));
    }
    Ok(table)
}

/// Whether a scenario satisfies the null hypothesis by construction.
pub fn is_null_design(sc: &ScenarioConfig) -> bool {
    // the second group of 2(ii)/2(iii) never carries the uniform V scaling
    let unscaled_second = matches!(sc.example, ExampleId::Ex2ii | ExampleId::Ex2iii) && sc.v_diag == VDiag::Uniform;
    sc.example.family() == 1 || (sc.changed_coords() == 0 && !unscaled_second)
}

/// [`run_power_study`] restricted to null designs, so rates estimate size.
pub fn run_size_study(cfg: &StudyConfig) -> Result<PowerTable> {
    if let Some(sc) = cfg.scenarios.iter().find(|s| !is_null_design(s)) {
        return Err(Error::arg(format!("scenario {} is not a null design (needs example 1 or beta * p < 1)", sc.label())));
    }
    run_power_study(cfg)
}

/// How the two groups are drawn from a real dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSelection {
    pub first: String,
    pub second: String,
    pub null_control: bool,
}

impl ClassSelection {
    pub fn resolve(data: &RealDataset, classes: Option<&(String, String)>, null_control: bool) -> Result<Self> {
        let (a, b) = match classes {
            Some((a, b)) => {
                data.class(a)?;
                data.class(b)?;
                (a.clone(), b.clone())
            }
            None => {
                let (a, b) = data.default_pair()?;
                (a.to_string(), b.to_string())
            }
        };
        Ok(ClassSelection { second: if null_control { a.clone() } else { b }, first: a, null_control })
    }

    fn label(&self) -> String {
        if self.null_control {
            format!("class{}_null", self.first)
        } else {
            format!("class{}_vs_class{}", self.first, self.second)
        }
    }
}

/// Power on a real dataset: for each size `n`, repeatedly draws `n` rows per
/// class without replacement and tests. With `null_control`, both groups come
/// from disjoint rows of the same class.
pub fn run_realdata_study(
    data: &RealDataset,
    sizes: &[usize],
    selection: &ClassSelection,
    cfg: &StudyConfig,
) -> Result<PowerTable> {
    let specs = cfg.specs()?;
    if cfg.replications == 0 || cfg.permutations < MIN_PERMUTATIONS {
        return Err(Error::arg("replications must be >= 1 and permutations >= 20"));
    }
    let a = data.class(&selection.first)?;
    let b = data.class(&selection.second)?;
    for &n in sizes {
        let needed = if selection.null_control { (2 * n, 0) } else { (n, n) };
        if n < 2 || needed.0 > a.len() || needed.1 > b.len() {
            return Err(Error::arg(format!(
                "size {n} is not available (class '{}' has {} rows, class '{}' has {})",
                selection.first,
                a.len(),
                selection.second,
                b.len()
            )));
        }
    }
    let mut table = PowerTable { rows: Vec::new(), include_time: cfg.record_time };
    for (g, &n) in sizes.iter().enumerate() {
        let meta = CellMeta {
            grid: g,
            label: format!("{}_n{n}", selection.label()),
            n,
            m: n,
            p: data.p(),
            replications: cfg.replications,
        };
        let reps = crate::par::map_indexed(cfg.replications, |r| {
            let mut rng = replication_rng(cfg, g, r);
            let (x, y): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if selection.null_control {
                let idx = index::sample(&mut rng, a.len(), 2 * n).into_vec();
                (idx[..n].iter().map(|&i| a[i].clone()).collect(), idx[n..].iter().map(|&i| a[i].clone()).collect())
            } else {
                let ix = index::sample(&mut rng, a.len(), n).into_vec();
                let iy = index::sample(&mut rng, b.len(), n).into_vec();
                (ix.iter().map(|&i| a[i].clone()).collect(), iy.iter().map(|&i| b[i].clone()).collect())
            };
            let sample = LabeledSample::from_groups(&x, &y)?;
            test_all_kernels(&sample, &specs, cfg.alpha, &replication_plan(cfg, g, r), cfg.record_time)
        });
        table.rows.extend(aggregate(&meta, &specs, reps, cfg.record_time));
    }
    Ok(table)
}

/// Runs every part of a study: the scenario grid, then the real-data source.
pub fn run_study(cfg: &StudyConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let mut table = PowerTable { rows: Vec::new(), include_time: cfg.record_time };
    if !cfg.scenarios.is_empty() {
        table.rows.extend(run_power_study(cfg)?.rows);
    }
    if let Some(rd) = &cfg.realdata {
        let data = load_delimited(&rd.file, rd.format)?;
        let sel = ClassSelection::resolve(&data, rd.classes.as_ref(), rd.null_control)?;
        let offset = cfg.scenarios.len();
        let sub = StudyConfig { seed: seed::derive(cfg.seed, &[offset as u64]), ..cfg.clone() };
        table.rows.extend(run_realdata_study(&data, &rd.sizes, &sel, &sub)?.rows.into_iter().map(|mut r| {
            r.grid += offset;
            r
        }));
    }
    Ok(table)
}

/// Interface for comparing other two-sample tests under the same harness.
pub trait TwoSampleTest: Sync {
    fn name(&self) -> String;

    /// Level-`alpha` decision on `sample`; `seed` keys any randomness.
    fn reject(&self, sample: &LabeledSample, alpha: f64, seed: u64) -> Result<bool>;
}

/// A kernel permutation test with `permutations` Monte Carlo draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPermutationTest {
    pub spec: KernelSpec,
    pub permutations: usize,
}

impl TwoSampleTest for KernelPermutationTest {
    fn name(&self) -> String {
        self.spec.family.token().to_string()
    }

    fn reject(&self, sample: &LabeledSample, alpha: f64, seed: u64) -> Result<bool> {
        let plan = PermutationPlan::monte_carlo(self.permutations, seed);
        Ok(crate::permutation::permutation_test(sample, &self.spec, alpha, &plan)?.reject)
    }
}

/// Scenario grid study over arbitrary tests; `cfg.kernels` is ignored.
pub fn run_custom_study(cfg: &StudyConfig, tests: &[&dyn TwoSampleTest]) -> Result<PowerTable> {
    cfg.validate()?;
    if tests.is_empty() {
        return Err(Error::arg("no tests supplied"));
    }
    let mut table = PowerTable { rows: Vec::new(), include_time: cfg.record_time };
    for (g, sc) in cfg.scenarios.iter().enumerate() {
        let meta = CellMeta { grid: g, label: sc.label(), n: sc.n, m: sc.m, p: sc.p, replications: cfg.replications };
        let mut population = sc.clone();
        population.seed = seed::derive(cfg.seed, &[g as u64, tag::POPULATION, sc.seed]);
        let reps: Vec<Result<Decisions>> = match Scenario::new(population) {
            Ok(scenario) => crate::par::map_indexed(cfg.replications, |r| {
                let sample = scenario.draw(&mut replication_rng(cfg, g, r))?;
                let perm_seed = seed::derive(cfg.seed, &[g as u64, r as u64, tag::PERMUTATION]);
                tests
                    .iter()
                    .map(|t| {
                        let start = clock(cfg.record_time);
                        Ok((t.reject(&sample, cfg.alpha, perm_seed)?, elapsed(start)))
                    })
                    .collect()
            }),
            Err(e) => vec![Err(e)],
        };
        let names: Vec<String> = tests.iter().map(|t| t.name()).collect();
        match reps.into_iter().collect::<Result<Vec<_>>>() {
            Err(e) => table.rows.extend(names.into_iter().map(|k| PowerRow::failed(&meta, k, &e))),
            Ok(decisions) => table.rows.extend(names.into_iter().enumerate().map(|(k, name)| {
                let hits = decisions.iter().filter(|d| d[k].0).count();
                let time: Duration = decisions.iter().map(|d| d[k].1).sum();
                PowerRow::completed(&meta, name, hits, cfg.record_time.then_some(time))
            })),
        }
    }
    Ok(table)
}
