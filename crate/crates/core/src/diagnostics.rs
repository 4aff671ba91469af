//! Empirical discrepancy measures between the two groups, plus estimators of
//! the moment constants that drive the limit theory.
//!
//! The measures map onto the regimes the tests are sensitive to: mean and
//! variance gaps (every kernel), per-coordinate marginal differences (the L1
//! kernel), and covariance differences (only a non-trivial fixed-size limit).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotics::MomentConstants;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::seed;
use crate::statistic::{CompensatedSum, LabeledSample, Permutation, PsiBarMatrix};

/// Per-coordinate group means and unbiased variances.
fn coordinate_moments(sample: &LabeledSample, second: bool) -> (Vec<f64>, Vec<f64>) {
    let p = sample.p();
    let (rows, k): (Vec<&[f64]>, usize) = if second {
        (sample.second_group().collect(), sample.m())
    } else {
        (sample.first_group().collect(), sample.n())
    };
    let mut mean = vec![0.0; p];
    for r in &rows {
        for (acc, v) in mean.iter_mut().zip(r.iter()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= k as f64);
    let mut var = vec![0.0; p];
    for r in &rows {
        for u in 0..p {
            let d = r[u] - mean[u];
            var[u] += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= (k - 1) as f64);
    (mean, var)
}

/// `(1/p) sum_u (mean_x - mean_y)^2` and `|(1/p) sum_u (var_x - var_y)|`.
pub fn mean_variance_gaps(sample: &LabeledSample) -> (f64, f64) {
    let (mx, vx) = coordinate_moments(sample, false);
    let (my, vy) = coordinate_moments(sample, true);
    let p = sample.p() as f64;
    let mean_gap = mx.iter().zip(&my).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p;
    let var_gap = (vx.iter().zip(&vy).map(|(a, b)| a - b).sum::<f64>() / p).abs();
    (mean_gap, var_gap)
}

/// Average over coordinates of the univariate unbiased energy-distance
/// statistic. Equals the L1-kernel statistic on the full sample, so it can be
/// slightly negative when the groups agree.
pub fn marginal_energy_sum(sample: &LabeledSample) -> f64 {
    let (n, m, p) = (sample.n(), sample.m(), sample.p());
    let per_coord = crate::par::map_indexed(p, |u| {
        let col: Vec<f64> = sample.rows().map(|r| r[u]).collect();
        let (mut sx, mut sy, mut sxy) = (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
        for i in 0..n + m {
            for j in i + 1..n + m {
                let d = (col[i] - col[j]).abs();
                match (i < n, j < n) {
                    (true, true) => sx.add(d),
                    (false, false) => sy.add(d),
                    _ => sxy.add(d),
                }
            }
        }
        let (nf, mf) = (n as f64, m as f64);
        2.0 / (nf * mf) * sxy.value() - (2.0 / (nf * (nf - 1.0)) * sx.value() + 2.0 / (mf * (mf - 1.0)) * sy.value())
    });
    let mut total = CompensatedSum::default();
    per_coord.into_iter().for_each(|v| total.add(v));
    total.value() / p as f64
}

fn centered_block(sample: &LabeledSample, second: bool) -> DMatrix<f64> {
    let p = sample.p();
    let (mean, _) = coordinate_moments(sample, second);
    let rows: Vec<&[f64]> = if second { sample.second_group().collect() } else { sample.first_group().collect() };
    DMatrix::from_fn(rows.len(), p, |i, u| rows[i][u] - mean[u])
}

/// Unbiased sample covariance matrix of one group.
pub fn sample_covariance(sample: &LabeledSample, second: bool) -> DMatrix<f64> {
    let c = centered_block(sample, second);
    let k = c.nrows() as f64;
    c.transpose() * &c / (k - 1.0)
}

/// `(1/p)` times the squared Frobenius distance between group covariances.
pub fn cov_gap(sample: &LabeledSample) -> f64 {
    let d = sample_covariance(sample, false) - sample_covariance(sample, true);
    d.norm_squared() / sample.p() as f64
}

/// `(4/p) sum_{u,v} cov_x(u,v) cov_y(u,v)`: the cross variance constant for
/// squared-difference kernels.
pub fn analytic_vxy_quadratic(cov_x: &DMatrix<f64>, cov_y: &DMatrix<f64>) -> Result<f64> {
    if !cov_x.is_square() || cov_x.shape() != cov_y.shape() {
        return Err(Error::arg(format!(
            "covariances must be square and equal-sized, got {:?} and {:?}",
            cov_x.shape(),
            cov_y.shape()
        )));
    }
    let p = cov_x.nrows();
    if p == 0 {
        return Err(Error::arg("covariances are empty"));
    }
    Ok(4.0 * cov_x.component_mul(cov_y).sum() / p as f64)
}

struct PairBlocks {
    psi: PsiBarMatrix,
    n: usize,
    m: usize,
}

impl PairBlocks {
    fn new(sample: &LabeledSample, spec: &KernelSpec) -> Self {
        PairBlocks { psi: PsiBarMatrix::build(sample, spec.psi()), n: sample.n(), m: sample.m() }
    }

    fn within(&self, second: bool) -> (usize, impl Fn(usize, usize) -> f64 + '_) {
        let (off, k) = if second { (self.n, self.m) } else { (0, self.n) };
        (k, move |i: usize, j: usize| self.psi.get(off + i, off + j))
    }

    fn cross(&self, i: usize, j: usize) -> f64 {
        self.psi.get(i, self.n + j)
    }

    fn within_mean(&self, second: bool) -> f64 {
        let (k, a) = self.within(second);
        let mut s = CompensatedSum::default();
        for i in 0..k {
            for j in i + 1..k {
                s.add(a(i, j));
            }
        }
        2.0 * s.value() / (k * (k - 1)) as f64
    }

    fn cross_mean(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for i in 0..self.n {
            for j in 0..self.m {
                s.add(self.cross(i, j));
            }
        }
        s.value() / (self.n * self.m) as f64
    }

    /// Unbiased estimate of `E h(Z, Z')^2` for the double-centered within
    /// kernel `h`, via U-centering.
    fn within_centered_square(&self, second: bool) -> f64 {
        let (k, a) = self.within(second);
        let row: Vec<f64> = (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| a(i, j)).sum()).collect();
        let total: f64 = row.iter().sum();
        let kf = k as f64;
        let mut s = CompensatedSum::default();
        for i in 0..k {
            for j in i + 1..k {
                let c = a(i, j) - (row[i] + row[j]) / (kf - 2.0) + total / ((kf - 1.0) * (kf - 2.0));
                s.add(c * c);
            }
        }
        2.0 * s.value() / (kf * (kf - 3.0))
    }

    /// Same for the cross kernel, centering each pair by the other rows and
    /// columns only; the final factor removes the leftover inflation.
    fn cross_centered_square(&self) -> f64 {
        let (n, m) = (self.n, self.m);
        let (nf, mf) = (n as f64, m as f64);
        let row: Vec<f64> = (0..n).map(|i| (0..m).map(|j| self.cross(i, j)).sum()).collect();
        let col: Vec<f64> = (0..m).map(|j| (0..n).map(|i| self.cross(i, j)).sum()).collect();
        let total: f64 = row.iter().sum();
        let mut s = CompensatedSum::default();
        for (i, &ri) in row.iter().enumerate() {
            for (j, &cj) in col.iter().enumerate() {
                let b = self.cross(i, j);
                let c = b - (ri - b) / (mf - 1.0) - (cj - b) / (nf - 1.0)
                    + (total - ri - cj + b) / ((nf - 1.0) * (mf - 1.0));
                s.add(c * c);
            }
        }
        s.value() / (nf * mf) * (nf - 1.0) * (mf - 1.0) / (nf * mf)
    }

    fn within_mean_square(&self, second: bool, e: f64) -> f64 {
        let (k, a) = self.within(second);
        let mut s = CompensatedSum::default();
        for i in 0..k {
            for j in i + 1..k {
                s.add((a(i, j) - e).powi(2));
            }
        }
        2.0 * s.value() / (k * (k - 1)) as f64
    }

    fn cross_mean_square(&self, e: f64) -> f64 {
        let mut s = CompensatedSum::default();
        for i in 0..self.n {
            for j in 0..self.m {
                s.add((self.cross(i, j) - e).powi(2));
            }
        }
        s.value() / (self.n * self.m) as f64
    }
}

/// Plug-in estimates of `e_x, e_y, e_xy` (pair means of `psi_bar`) and of
/// `v_x, v_y, v_xy` (variances of `sqrt(p)` times the double-centered
/// `psi_bar`), for the `psi` of `spec`.
pub fn estimate_moment_constants(sample: &LabeledSample, spec: &KernelSpec) -> Result<MomentConstants> {
    if sample.n() < 4 || sample.m() < 4 {
        return Err(Error::Estimation(format!(
            "U-centering needs at least 4 rows per group (n={}, m={})",
            sample.n(),
            sample.m()
        )));
    }
    let blocks = PairBlocks::new(sample, spec);
    let p = sample.p() as f64;
    let clamp = |v: f64| v.max(0.0);
    let c = MomentConstants {
        e_x: blocks.within_mean(false),
        e_y: blocks.within_mean(true),
        e_xy: blocks.cross_mean(),
        v_x: clamp(p * blocks.within_centered_square(false)),
        v_y: clamp(p * blocks.within_centered_square(true)),
        v_xy: clamp(p * blocks.cross_centered_square()),
    };
    c.validate().map_err(|e| Error::Estimation(e.to_string()))?;
    Ok(c)
}

/// Mean squares of `psi_bar - e` over distinct pairs, with their `sqrt(p)`
/// multiples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Moments {
    pub alpha2_x: f64,
    pub alpha2_y: f64,
    pub alpha2_xy: f64,
    pub sqrt_p_alpha2_x: f64,
    pub sqrt_p_alpha2_y: f64,
    pub sqrt_p_alpha2_xy: f64,
}

pub fn l2_moment_estimates(sample: &LabeledSample, spec: &KernelSpec) -> L2Moments {
    let blocks = PairBlocks::new(sample, spec);
    let ax = blocks.within_mean_square(false, blocks.within_mean(false));
    let ay = blocks.within_mean_square(true, blocks.within_mean(true));
    let axy = blocks.cross_mean_square(blocks.cross_mean());
    let sp = (sample.p() as f64).sqrt();
    L2Moments {
        alpha2_x: ax,
        alpha2_y: ay,
        alpha2_xy: axy,
        sqrt_p_alpha2_x: sp * ax,
        sqrt_p_alpha2_y: sp * ay,
        sqrt_p_alpha2_xy: sp * axy,
    }
}

/// Advisory label for which alternative the data most resembles. Rate
/// conditions cannot be checked on one dataset, so each measure is compared
/// with its spread under random relabelings instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeHint {
    /// Means or variances differ: all kernels should have power.
    MeanVariance,
    /// Only one-dimensional margins differ: the L1 kernel should have power.
    Marginal,
    /// Only covariances differ: limited, non-trivial power at best.
    Covariance,
    /// No measure stands out from the relabeling spread.
    Undetected,
}

impl RegimeHint {
    pub fn token(self) -> &'static str {
        match self {
            RegimeHint::MeanVariance => "mean-variance",
            RegimeHint::Marginal => "marginal",
            RegimeHint::Covariance => "covariance",
            RegimeHint::Undetected => "undetected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub mean_gap: f64,
    pub var_gap: f64,
    pub marginal_ed_sum: f64,
    pub cov_gap: f64,
}

impl Measures {
    pub fn of(sample: &LabeledSample) -> Self {
        let (mean_gap, var_gap) = mean_variance_gaps(sample);
        Measures {
            mean_gap,
            var_gap,
            marginal_ed_sum: marginal_energy_sum(sample).max(0.0),
            cov_gap: cov_gap(sample),
        }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.mean_gap, self.var_gap, self.marginal_ed_sum, self.cov_gap]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub measures: Measures,
    /// Share of relabelings (identity included) at least as extreme, per measure.
    pub null_p_values: Measures,
    pub null_draws: usize,
    pub regime_hint: RegimeHint,
}

impl DiscrepancyReport {
    pub const CSV_HEADER: &'static str = "measure,value,null_p_value";

    pub fn csv_rows(&self) -> Vec<String> {
        let names = ["mean_gap", "var_gap", "marginal_ed_sum", "cov_gap"];
        let v = self.measures.as_array();
        let q = self.null_p_values.as_array();
        let mut rows: Vec<String> = (0..4).map(|k| format!("{},{},{}", names[k], v[k], q[k])).collect();
        rows.push(format!("regime_hint,{},", self.regime_hint.token()));
        rows
    }
}

pub const DEFAULT_NULL_DRAWS: usize = 49;
const HINT_LEVEL: f64 = 0.05;

/// Computes the four measures and the advisory regime hint, using
/// `null_draws` random relabelings seeded from `seed_value`.
pub fn discrepancy_report(sample: &LabeledSample, null_draws: usize, seed_value: u64) -> Result<DiscrepancyReport> {
    if null_draws == 0 {
        return Err(Error::arg("need at least one relabeling"));
    }
    let observed = Measures::of(sample);
    let total = sample.total();
    let null: Vec<Result<[f64; 4]>> = crate::par::map_indexed(null_draws, |d| {
        let mut rng = seed::rng(seed::derive(seed_value, &[seed::tag::DIAGNOSTIC, d as u64]));
        let shuffled = sample.permute_rows(&Permutation::random(total, &mut rng))?;
        Ok(Measures::of(&shuffled).as_array())
    });
    let null = null.into_iter().collect::<Result<Vec<_>>>()?;
    let obs = observed.as_array();
    let mut pv = [0.0; 4];
    for k in 0..4 {
        let hits = null.iter().filter(|v| v[k] >= obs[k]).count() + 1;
        pv[k] = hits as f64 / (null_draws + 1) as f64;
    }
    let flagged = |k: usize| pv[k] <= HINT_LEVEL;
    let regime_hint = if flagged(0) || flagged(1) {
        RegimeHint::MeanVariance
    } else if flagged(2) {
        RegimeHint::Marginal
    } else if flagged(3) {
        RegimeHint::Covariance
    } else {
        RegimeHint::Undetected
    };
    Ok(DiscrepancyReport {
        measures: observed,
        null_p_values: Measures { mean_gap: pv[0], var_gap: pv[1], marginal_ed_sum: pv[2], cov_gap: pv[3] },
        null_draws,
        regime_hint,
    })
}
