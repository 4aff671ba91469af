//! Randomization distribution, critical values and the level-α permutation
//! test.
//!
//! Exact mode enumerates all `(n+m)!` permutations by Lehmer rank. Monte Carlo
//! mode keeps the unpermuted statistic and adds `S - 1` uniformly drawn
//! permutations (with replacement); draw `s` comes from its own ChaCha stream
//! so the result does not depend on evaluation order.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::seed;
use crate::statistic::{build_kernel_matrix, ed_statistic, Grouping, KernelMatrix, LabeledSample, Permutation};

/// Default ceiling on `(n+m)!` for exact enumeration (10!).
pub const DEFAULT_EXACT_CAP: u128 = 3_628_800;
pub const DEFAULT_PERMUTATIONS: usize = 300;

pub fn factorial(k: usize) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, v| acc * BigUint::from(v))
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

/// `(n+m)!` if it fits in a `u128`.
pub fn total_permutations(total: usize) -> Option<u128> {
    (1..=total as u128).try_fold(1u128, |acc, v| acc.checked_mul(v))
}

/// Number of first-group positions `j` with `perm(j)` in the second group.
pub fn n_of_gamma(perm: &Permutation, n: usize, m: usize) -> usize {
    debug_assert_eq!(perm.len(), n + m);
    perm.as_slice()[..n].iter().filter(|&&t| t >= n).count()
}

/// `|S_w| = C(m, w) C(n, n-w) n! m!`, the number of permutations with
/// `N(Γ) = w`.
pub fn s_w_cardinality(n: usize, m: usize, w: usize) -> Result<BigUint> {
    if w > n.min(m) {
        return Err(Error::arg(format!("w={w} outside 0..={}", n.min(m))));
    }
    Ok(binomial(m, w) * binomial(n, n - w) * factorial(n) * factorial(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub mode: PlanMode,
    /// `S`, including the identity. Ignored in exact mode.
    pub count: usize,
    pub seed: u64,
    pub include_identity: bool,
    pub exact_cap: u128,
}

impl PermutationPlan {
    pub fn monte_carlo(count: usize, seed: u64) -> Self {
        PermutationPlan {
            mode: PlanMode::MonteCarlo,
            count,
            seed,
            include_identity: true,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }

    pub fn exact() -> Self {
        PermutationPlan {
            mode: PlanMode::ExactEnumeration,
            count: 0,
            seed: 0,
            include_identity: true,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u128) -> Self {
        self.exact_cap = cap;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Whether exact enumeration is allowed for `total` rows under the cap.
    pub fn exact_feasible(&self, total: usize) -> bool {
        total_permutations(total).is_some_and(|t| t <= self.exact_cap)
    }

    /// Number of statistics the plan produces for `total` rows.
    pub fn resolved_count(&self, total: usize) -> Result<usize> {
        match self.mode {
            PlanMode::ExactEnumeration => {
                if !self.exact_feasible(total) {
                    return Err(Error::arg(format!(
                        "exact enumeration of {total}! permutations exceeds the cap of {}; \
                         use a Monte Carlo plan instead",
                        self.exact_cap
                    )));
                }
                Ok(total_permutations(total).expect("checked above") as usize)
            }
            PlanMode::MonteCarlo => {
                if self.count == 0 {
                    return Err(Error::arg("Monte Carlo plan needs at least one permutation"));
                }
                Ok(self.count)
            }
        }
    }

    /// The `k`-th permutation of the plan; index 0 is always the identity.
    pub fn permutation_at(&self, total: usize, k: usize) -> Permutation {
        match self.mode {
            PlanMode::ExactEnumeration => Permutation::from_rank(total, k as u128),
            PlanMode::MonteCarlo if k == 0 && self.include_identity => Permutation::identity(total),
            PlanMode::MonteCarlo => {
                Permutation::random(total, &mut seed::stream_rng(self.seed, k as u64))
            }
        }
    }

    /// All groupings the plan visits, paired with `N(Γ)`.
    pub fn groupings(&self, n: usize, m: usize) -> Result<Vec<(Grouping, usize)>> {
        let count = self.resolved_count(n + m)?;
        Ok(crate::par::map_indexed(count, |k| {
            let perm = self.permutation_at(n + m, k);
            (perm.grouping(n), n_of_gamma(&perm, n, m))
        }))
    }

    pub fn summary(&self, n: usize, m: usize) -> PlanSummary {
        PlanSummary {
            mode: self.mode,
            count: self.resolved_count(n + m).unwrap_or(0),
            seed: match self.mode {
                PlanMode::ExactEnumeration => None,
                PlanMode::MonteCarlo => Some(self.seed),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub mode: PlanMode,
    pub count: usize,
    pub seed: Option<u64>,
}

/// Empirical law of the permuted statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationDistribution {
    values: Vec<f64>,
    plan: PlanSummary,
    /// Counts of `N(Γ) = w` over the visited permutations, indexed by `w`.
    w_histogram: Vec<u64>,
}

impl RandomizationDistribution {
    /// Builds a distribution from raw values (sorted internally).
    pub fn from_values(mut values: Vec<f64>, plan: PlanSummary, w_histogram: Vec<u64>) -> Self {
        values.sort_by(f64::total_cmp);
        RandomizationDistribution { values, plan, w_histogram }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn plan(&self) -> &PlanSummary {
        &self.plan
    }

    pub fn w_histogram(&self) -> &[u64] {
        &self.w_histogram
    }

    /// `#{values <= t} / count`.
    pub fn cdf(&self, t: f64) -> f64 {
        let below = self.values.partition_point(|v| *v <= t);
        below as f64 / self.count() as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.count() as f64
    }

    /// Smallest stored value `t` with `cdf(t) >= 1 - alpha`.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if self.values.is_empty() {
            return Err(Error::State("empty randomization distribution".into()));
        }
        let total = self.count() as f64;
        // Smallest rank r with r / total >= 1 - alpha; the slack absorbs the
        // rounding in (1 - alpha) * total for levels like 0.05.
        let rank = ((1.0 - alpha) * total - 1e-9).ceil().clamp(1.0, total) as usize;
        Ok(self.values[rank - 1])
    }

    /// `#{values >= t} / count`.
    pub fn upper_tail(&self, t: f64) -> f64 {
        let below = self.values.partition_point(|v| *v < t);
        (self.count() - below) as f64 / self.count() as f64
    }
}

pub fn critical_value(dist: &RandomizationDistribution, alpha: f64) -> Result<f64> {
    dist.critical_value(alpha)
}

/// Evaluates the plan's permuted statistics over `km`.
pub fn randomization_distribution(
    km: &KernelMatrix,
    plan: &PermutationPlan,
) -> Result<RandomizationDistribution> {
    let (n, m) = (km.n(), km.m());
    let total = n + m;
    let count = plan.resolved_count(total)?;
    let evaluated: Vec<(f64, usize)> = crate::par::map_indexed(count, |k| {
        let perm = plan.permutation_at(total, k);
        (km.statistic_for(&perm.grouping(n)), n_of_gamma(&perm, n, m))
    });
    let mut hist = vec![0u64; n.min(m) + 1];
    let values = evaluated
        .into_iter()
        .map(|(v, w)| {
            hist[w] += 1;
            v
        })
        .collect();
    Ok(RandomizationDistribution::from_values(values, plan.summary(n, m), hist))
}

/// Same as [`randomization_distribution`] over precomputed groupings.
pub fn distribution_over(
    km: &KernelMatrix,
    groupings: &[(Grouping, usize)],
    plan: PlanSummary,
) -> RandomizationDistribution {
    let mut hist = vec![0u64; km.n().min(km.m()) + 1];
    let values = groupings
        .iter()
        .map(|(g, w)| {
            hist[*w] += 1;
            km.statistic_for(g)
        })
        .collect();
    RandomizationDistribution::from_values(values, plan, hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub plan: PlanSummary,
    pub w_histogram: Vec<u64>,
}

impl TestResult {
    pub fn from_distribution(statistic: f64, dist: &RandomizationDistribution, alpha: f64) -> Result<Self> {
        let critical_value = dist.critical_value(alpha)?;
        Ok(TestResult {
            statistic,
            critical_value,
            p_value: dist.upper_tail(statistic),
            reject: statistic > critical_value,
            alpha,
            plan: dist.plan().clone(),
            w_histogram: dist.w_histogram().to_vec(),
        })
    }

    /// `statistic,critical_value,p_value,reject`
    pub fn csv_line(&self) -> String {
        format!("{},{},{},{}", self.statistic, self.critical_value, self.p_value, self.reject)
    }
}

/// Permutation test on a prebuilt kernel matrix.
pub fn permutation_test_matrix(km: &KernelMatrix, alpha: f64, plan: &PermutationPlan) -> Result<TestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if plan.mode == PlanMode::MonteCarlo && !plan.include_identity {
        return Err(Error::arg("Monte Carlo plans must include the identity permutation"));
    }
    let dist = randomization_distribution(km, plan)?;
    TestResult::from_distribution(ed_statistic(km), &dist, alpha)
}

/// Level-`alpha` test: reject when `ED_n^k(Z)` strictly exceeds the
/// `(1 - alpha)` quantile of the randomization distribution.
pub fn permutation_test(
    sample: &LabeledSample,
    spec: &KernelSpec,
    alpha: f64,
    plan: &PermutationPlan,
) -> Result<TestResult> {
    let km = build_kernel_matrix(sample, spec)?;
    permutation_test_matrix(&km, alpha, plan)
}

/// Ratio of two big integers as `f64`, for reporting.
pub fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    num_rational::BigRational::new(num.clone().into(), den.clone().into())
        .to_f64()
        .unwrap_or(f64::NAN)
}
