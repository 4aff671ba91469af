//! Seeded generators for the simulation designs.
//!
//! Examples 1 and 2 are linear transforms of i.i.d. innovations by the square
//! root of an AR correlation matrix (optionally with a random diagonal scale);
//! Example 3 swaps some Gaussian marginals for other unit-variance laws, and
//! Example 4 hides a dependence between Bernoulli coordinates that leaves every
//! one- (4i) or two-dimensional (4ii) margin unchanged.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::statistic::LabeledSample;

const NEG_EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExampleId {
    #[serde(rename = "1")]
    Ex1,
    #[serde(rename = "2i")]
    Ex2i,
    #[serde(rename = "2ii")]
    Ex2ii,
    #[serde(rename = "2iii")]
    Ex2iii,
    #[serde(rename = "3i")]
    Ex3i,
    #[serde(rename = "3ii")]
    Ex3ii,
    #[serde(rename = "4i")]
    Ex4i,
    #[serde(rename = "4ii")]
    Ex4ii,
}

impl ExampleId {
    pub const ALL: [ExampleId; 8] = [
        ExampleId::Ex1,
        ExampleId::Ex2i,
        ExampleId::Ex2ii,
        ExampleId::Ex2iii,
        ExampleId::Ex3i,
        ExampleId::Ex3ii,
        ExampleId::Ex4i,
        ExampleId::Ex4ii,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ExampleId::Ex1 => "1",
            ExampleId::Ex2i => "2i",
            ExampleId::Ex2ii => "2ii",
            ExampleId::Ex2iii => "2iii",
            ExampleId::Ex3i => "3i",
            ExampleId::Ex3ii => "3ii",
            ExampleId::Ex4i => "4i",
            ExampleId::Ex4ii => "4ii",
        }
    }

    /// The example number (1 to 4).
    pub fn family(self) -> u8 {
        match self {
            ExampleId::Ex1 => 1,
            ExampleId::Ex2i | ExampleId::Ex2ii | ExampleId::Ex2iii => 2,
            ExampleId::Ex3i | ExampleId::Ex3ii => 3,
            ExampleId::Ex4i | ExampleId::Ex4ii => 4,
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("ex").unwrap_or(&t);
        ExampleId::ALL
            .into_iter()
            .find(|e| e.token() == t)
            .ok_or_else(|| Error::arg(format!("unknown example '{s}' (expected one of 1, 2i, 2ii, 2iii, 3i, 3ii, 4i, 4ii)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Innovation {
    #[default]
    Normal,
    /// `Exp(1) - 1`.
    Exponential,
}

impl FromStr for Innovation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Innovation::Normal),
            "exponential" | "exp" => Ok(Innovation::Exponential),
            _ => Err(Error::arg(format!("unknown innovation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VDiag {
    #[default]
    Ones,
    /// Square-root scales drawn from Uniform(1, 5), once per population seed.
    Uniform,
}

impl FromStr for VDiag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ones" | "1" => Ok(VDiag::Ones),
            "uniform" => Ok(VDiag::Uniform),
            _ => Err(Error::arg(format!("unknown v_diag '{s}'"))),
        }
    }
}

fn default_rho() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub example: ExampleId,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub innovation: Innovation,
    #[serde(default)]
    pub v_diag: VDiag,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(example: ExampleId, p: usize, n: usize, m: usize) -> Self {
        ScenarioConfig {
            example,
            p,
            n,
            m,
            rho: default_rho(),
            beta: 0.0,
            innovation: Innovation::Normal,
            v_diag: VDiag::Ones,
            seed: 0,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::arg("p must be positive"));
        }
        if self.n < 2 || self.m < 2 {
            return Err(Error::arg(format!("group sizes must be at least 2 (n={}, m={})", self.n, self.m)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::arg(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return Err(Error::arg(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        if self.example.family() == 2 && self.rho != 0.5 {
            return Err(Error::arg(format!("example {} uses rho = 0.5, got {}", self.example, self.rho)));
        }
        Ok(())
    }

    /// Number of altered coordinates, `floor(beta * p)`.
    pub fn changed_coords(&self) -> usize {
        ((self.beta * self.p as f64).floor() as usize).min(self.p)
    }

    /// Short identifier used in study tables.
    pub fn label(&self) -> String {
        let mut s = format!("ex{}_p{}_n{}_m{}_beta{}", self.example, self.p, self.n, self.m, self.beta);
        if matches!(self.example.family(), 1 | 2) {
            s.push_str(&format!("_rho{}", self.rho));
            if self.innovation == Innovation::Exponential {
                s.push_str("_exp");
            }
            if self.v_diag == VDiag::Uniform {
                s.push_str("_vunif");
            }
        }
        s
    }
}

/// `p x p` matrix with entries `rho^|i-j|`.
pub fn ar_correlation(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return Err(Error::arg(format!("rho must lie in (-1, 1), got {rho}")));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// Symmetric square root via a full eigendecomposition. Eigenvalues in
/// `[-1e-8, 0)` are clamped to zero.
pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::arg(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("matrix has non-finite entries"));
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min < -NEG_EIGEN_TOL {
        return Err(Error::NotPsd(min));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// A scenario with its population-level quantities (matrix square roots,
/// shifts) computed once; each [`Scenario::draw`] is then cheap.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
    mix_x: Option<DMatrix<f64>>,
    mix_y: Option<DMatrix<f64>>,
    shift_y: f64,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let (p, k) = (cfg.p, cfg.changed_coords());
        let mut scenario = Scenario { mix_x: None, mix_y: None, shift_y: 0.0, cfg };
        if scenario.cfg.example.family() > 2 {
            return Ok(scenario);
        }
        let r = ar_correlation(p, scenario.cfg.rho)?;
        let v_half: Vec<f64> = match scenario.cfg.v_diag {
            VDiag::Ones => vec![1.0; p],
            VDiag::Uniform => {
                let mut rng = seed::rng(seed::derive(scenario.cfg.seed, &[seed::tag::POPULATION]));
                (0..p).map(|_| rng.random_range(1.0..5.0)).collect()
            }
        };
        let scaled = |d: &[f64]| DMatrix::from_fn(p, p, |i, j| d[i] * r[(i, j)] * d[j]);
        scenario.mix_x = Some(spd_sqrt(&scaled(&v_half))?);
        let star = match scenario.cfg.example {
            ExampleId::Ex2ii => Some(1.05),
            ExampleId::Ex2iii => Some(1.04),
            _ => None,
        };
        if let Some(s) = star {
            let d: Vec<f64> = (0..p).map(|i| if i < k { s } else { 1.0 }).collect();
            scenario.mix_y = Some(spd_sqrt(&scaled(&d))?);
        }
        scenario.shift_y = match scenario.cfg.example {
            ExampleId::Ex2i => 0.125,
            ExampleId::Ex2iii => 0.1,
            _ => 0.0,
        };
        Ok(scenario)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Population square-root factor of each group, for Examples 1 and 2.
    pub fn mixing(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        let x = self.mix_x.as_ref()?;
        Some((x, self.mix_y.as_ref().unwrap_or(x)))
    }

    /// Population mean of the second group (the first is always centered).
    pub fn mean_y(&self) -> Vec<f64> {
        let k = self.cfg.changed_coords();
        (0..self.cfg.p)
            .map(|i| match self.cfg.example.family() {
                2 if i < k => self.shift_y,
                4 => 0.5,
                _ => 0.0,
            })
            .collect()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LabeledSample> {
        let ScenarioConfig { n, m, p, .. } = self.cfg;
        let k = self.cfg.changed_coords();
        let mut data = Vec::with_capacity((n + m) * p);
        match self.cfg.example {
            ExampleId::Ex1 | ExampleId::Ex2i | ExampleId::Ex2ii | ExampleId::Ex2iii => {
                let (ax, ay) = self.mixing().ok_or_else(|| Error::Internal("missing mixing matrix".into()))?;
                data.extend_from_slice(self.linear_block(ax, n, 0.0, 0, rng).as_slice());
                data.extend_from_slice(self.linear_block(ay, m, self.shift_y, k, rng).as_slice());
            }
            ExampleId::Ex3i | ExampleId::Ex3ii => {
                for _ in 0..n {
                    data.extend((0..p).map(|_| -> f64 { StandardNormal.sample(rng) }));
                }
                let half_width = 3f64.sqrt();
                for _ in 0..m {
                    for u in 0..p {
                        let v = if u >= k {
                            StandardNormal.sample(rng)
                        } else if self.cfg.example == ExampleId::Ex3i {
                            if rng.random::<bool>() { 1.0 } else { -1.0 }
                        } else {
                            rng.random_range(-half_width..half_width)
                        };
                        data.push(v);
                    }
                }
            }
            ExampleId::Ex4i | ExampleId::Ex4ii => {
                let coin = |rng: &mut R| if rng.random::<bool>() { 1.0 } else { 0.0 };
                for _ in 0..n * p {
                    data.push(coin(rng));
                }
                let width = if self.cfg.example == ExampleId::Ex4i { 2 } else { 3 };
                let blocks = k / width;
                for _ in 0..m {
                    for _ in 0..blocks {
                        let a = coin(rng);
                        if width == 2 {
                            data.extend([a, a]);
                        } else {
                            let b = coin(rng);
                            data.extend([a, b, if a == b { 1.0 } else { 0.0 }]);
                        }
                    }
                    for _ in blocks * width..p {
                        data.push(coin(rng));
                    }
                }
            }
        }
        LabeledSample::from_flat(data, n, m, p)
    }

    /// `rows` draws of `a z + shift` (shift on the first `k` coordinates),
    /// one per column; column-major storage makes it row-major sample data.
    fn linear_block<R: Rng + ?Sized>(&self, a: &DMatrix<f64>, rows: usize, shift: f64, k: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.cfg.p;
        let z = match self.cfg.innovation {
            Innovation::Normal => DMatrix::from_fn(p, rows, |_, _| StandardNormal.sample(rng)),
            Innovation::Exponential => DMatrix::from_fn(p, rows, |_, _| {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }),
        };
        let mut out = a * z;
        if shift != 0.0 {
            for mut col in out.column_iter_mut() {
                col.rows_mut(0, k).add_scalar_mut(shift);
            }
        }
        out
    }
}

/// Draws a sample from `cfg`, using `cfg.seed` for both the population and
/// the data.
pub fn generate(cfg: &ScenarioConfig) -> Result<LabeledSample> {
    let scenario = Scenario::new(cfg.clone())?;
    scenario.draw(&mut seed::rng(seed::derive(cfg.seed, &[seed::tag::DATA])))
}

fn generate_family(cfg: &ScenarioConfig, family: u8) -> Result<LabeledSample> {
    if cfg.example.family() != family {
        return Err(Error::arg(format!("config is for example {}, not example {family}", cfg.example)));
    }
    generate(cfg)
}

pub fn gen_example1(cfg: &ScenarioConfig) -> Result<LabeledSample> {
    generate_family(cfg, 1)
}

pub fn gen_example2(cfg: &ScenarioConfig) -> Result<LabeledSample> {
    generate_family(cfg, 2)
}

pub fn gen_example3(cfg: &ScenarioConfig) -> Result<LabeledSample> {
    generate_family(cfg, 3)
}

pub fn gen_example4(cfg: &ScenarioConfig) -> Result<LabeledSample> {
    generate_family(cfg, 4)
}
