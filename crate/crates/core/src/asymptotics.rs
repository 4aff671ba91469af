//! Closed-form high-dimensional limits of permuted statistics.
//!
//! For a permutation that moves `w` first-group rows into the second group,
//! the permuted statistic concentrates (as `p` grows with `n`, `m` fixed) at
//! `mu_{n,w} = (2 phi(e_xy) - phi(e_x) - phi(e_y)) f(w)` with Gaussian
//! fluctuations of variance `sigma2_{n,w} / p`. Under a uniformly random
//! permutation `w` is hypergeometric, which makes the limit a finite Gaussian
//! mixture. When `n, m` also grow with `n / m -> rho`, the scaled variance
//! tends to [`sigma2_hdmss`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::permutation::{binomial, distribution_over, PermutationPlan, PlanMode};
use crate::seed;
use crate::statistic::{Grouping, KernelMatrix};

/// Limiting means of `psi_bar` (`e_*`) and variances of the double-centered
/// pair operator (`v_*`), within and across the two samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstants {
    pub e_x: f64,
    pub e_y: f64,
    pub e_xy: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub v_xy: f64,
}

impl MomentConstants {
    pub fn new(e_x: f64, e_y: f64, e_xy: f64, v_x: f64, v_y: f64, v_xy: f64) -> Result<Self> {
        let c = MomentConstants { e_x, e_y, e_xy, v_x, v_y, v_xy };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [("e_x", self.e_x), ("e_y", self.e_y), ("e_xy", self.e_xy)] {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::Domain(format!("{name} must be finite and nonnegative, got {e}")));
            }
        }
        for (name, v) in [("v_x", self.v_x), ("v_y", self.v_y), ("v_xy", self.v_xy)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::arg(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// `2 phi(e_xy) - phi(e_x) - phi(e_y)`.
    pub fn mean_gap(&self, spec: &KernelSpec) -> Result<f64> {
        self.validate()?;
        Ok(2.0 * spec.phi_checked(self.e_xy)? - spec.phi_checked(self.e_x)? - spec.phi_checked(self.e_y)?)
    }

    /// `(v_xy phi'(e_xy)^2, v_x phi'(e_x)^2, v_y phi'(e_y)^2)`.
    fn scaled_variances(&self, spec: &KernelSpec) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let term = |v: f64, e: f64| -> Result<f64> {
            // a zero variance contributes nothing even where phi' is singular
            if v == 0.0 {
                return Ok(0.0);
            }
            let d = spec.phi_prime(e)?;
            Ok(v * d * d)
        };
        Ok((term(self.v_xy, self.e_xy)?, term(self.v_x, self.e_x)?, term(self.v_y, self.e_y)?))
    }

    /// The same constants with the roles of the two samples exchanged.
    pub fn swapped(&self) -> Self {
        MomentConstants { e_x: self.e_y, e_y: self.e_x, v_x: self.v_y, v_y: self.v_x, ..*self }
    }
}

fn check_sizes(n: usize, m: usize, w: usize) -> Result<()> {
    if n < 2 || m < 2 {
        return Err(Error::arg(format!("group sizes must be at least 2 (n={n}, m={m})")));
    }
    if w > n.min(m) {
        return Err(Error::arg(format!("w={w} outside 0..={}", n.min(m))));
    }
    Ok(())
}

/// The quadratic `f(w)` scaling the limiting mean of a permuted statistic.
pub fn f_w(n: usize, m: usize, w: usize) -> Result<f64> {
    check_sizes(n, m, w)?;
    let (nf, mf, wf) = (n as f64, m as f64, w as f64);
    let lin = (2.0 * mf - 1.0) / (mf * (mf - 1.0)) + (2.0 * nf - 1.0) / (nf * (nf - 1.0));
    let quad = 2.0 / (mf * nf) + 1.0 / (nf * (nf - 1.0)) + 1.0 / (mf * (mf - 1.0));
    Ok(1.0 - lin * wf + quad * wf * wf)
}

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// [`f_w`] in exact rational arithmetic.
pub fn f_w_exact(n: usize, m: usize, w: usize) -> Result<BigRational> {
    check_sizes(n, m, w)?;
    let (n, m, w) = (n as i64, m as i64, w as i64);
    let lin = rat(2 * m - 1, m * (m - 1)) + rat(2 * n - 1, n * (n - 1));
    let quad = rat(2, m * n) + rat(1, n * (n - 1)) + rat(1, m * (m - 1));
    Ok(rat(1, 1) - lin * rat(w, 1) + quad * rat(w * w, 1))
}

/// Limiting mean `mu_{n,w}` of the permuted statistic.
pub fn mu_nw(n: usize, m: usize, w: usize, c: &MomentConstants, spec: &KernelSpec) -> Result<f64> {
    Ok(c.mean_gap(spec)? * f_w(n, m, w)?)
}

/// Limiting variance `sigma2_{n,w}` (of `sqrt(p)` times the centered
/// permuted statistic), in its form collected by `v_xy`, `v_x`, `v_y`.
pub fn sigma2_nw(n: usize, m: usize, w: usize, c: &MomentConstants, spec: &KernelSpec) -> Result<f64> {
    check_sizes(n, m, w)?;
    let (txy, tx, ty) = c.scaled_variances(spec)?;
    let (nf, mf, wf) = (n as f64, m as f64, w as f64);
    let nm2 = nf * nf * mf * mf;
    let nn = nf * nf * (nf - 1.0) * (nf - 1.0);
    let mm = mf * mf * (mf - 1.0) * (mf - 1.0);
    let w2 = wf * wf;
    let quad = 2.0 / nm2 - 1.0 / nn - 1.0 / mm;

    let cxy = 4.0 / (nf * mf) - 4.0 * ((nf + mf) / nm2 - nf / nn - mf / mm) * wf + 4.0 * quad * w2;
    let cx = 2.0 / (nf * (nf - 1.0)) + 2.0 * (2.0 * nf / nm2 - (2.0 * nf - 1.0) / nn - 1.0 / mm) * wf
        - 2.0 * quad * w2;
    let cy = 2.0 / (mf * (mf - 1.0)) + 2.0 * (2.0 * mf / nm2 - 1.0 / nn - (2.0 * mf - 1.0) / mm) * wf
        - 2.0 * quad * w2;

    let terms = [cxy * txy, cx * tx, cy * ty];
    let value: f64 = terms.iter().sum();
    if value < 0.0 {
        let scale: f64 = [cxy.abs() * txy, cx.abs() * tx, cy.abs() * ty].iter().sum();
        if value >= -1e-12 * scale {
            return Ok(0.0);
        }
        return Err(Error::Internal(format!("negative variance {value} at n={n}, m={m}, w={w}")));
    }
    Ok(value)
}

/// Law of `W = N(Γ)` for a uniformly random permutation: hypergeometric
/// with `n` draws from `m` marked and `n` unmarked items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypergeometricLaw {
    pub n: usize,
    pub m: usize,
}

impl HypergeometricLaw {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::arg("group sizes must be positive"));
        }
        Ok(HypergeometricLaw { n, m })
    }

    pub fn support(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.n.min(self.m)
    }

    /// `C(m, w) C(n, n - w) / C(n + m, n)`; zero outside the support.
    pub fn pmf_exact(&self, w: usize) -> BigRational {
        if w > self.n.min(self.m) {
            return BigRational::zero();
        }
        let num = binomial(self.m, w) * binomial(self.n, self.n - w);
        let den = binomial(self.n + self.m, self.n);
        BigRational::new(num.into(), den.into())
    }

    pub fn pmf(&self, w: usize) -> f64 {
        self.pmf_exact(w).to_f64().unwrap_or(f64::NAN)
    }
}

pub fn hypergeom_pmf(law: &HypergeometricLaw, w: usize) -> BigRational {
    law.pmf_exact(w)
}

/// Scaled limiting variance when `n, m -> inf` with `n / m -> rho`.
pub fn sigma2_hdmss(rho: f64, c: &MomentConstants, spec: &KernelSpec) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::arg(format!("rho must be positive, got {rho}")));
    }
    let (txy, tx, ty) = c.scaled_variances(spec)?;
    Ok(4.0 * txy + 2.0 * rho * tx + 2.0 / rho * ty)
}

/// `P(N(0, sigma2_{n,W}) <= a)` for `W` hypergeometric; degenerate components
/// are point masses at zero.
pub fn mixture_normal_cdf(a: f64, n: usize, m: usize, c: &MomentConstants, spec: &KernelSpec) -> Result<f64> {
    let law = HypergeometricLaw::new(n, m)?;
    let std_normal = Normal::standard();
    let mut total = 0.0;
    for w in law.support() {
        let var = sigma2_nw(n, m, w, c, spec)?;
        let p = if var > 0.0 {
            std_normal.cdf(a / var.sqrt())
        } else if a >= 0.0 {
            1.0
        } else {
            0.0
        };
        total += law.pmf(w) * p;
    }
    // rounded pmf terms can sum a few ulps past 1
    Ok(total.clamp(0.0, 1.0))
}

/// Variances of the independent Gaussian families `b_ij` (cross pairs),
/// `c_{i1 i2}` (first-sample pairs) and `d_{j1 j2}` (second-sample pairs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianProcessSpec {
    pub n: usize,
    pub m: usize,
    pub v_xy: f64,
    pub v_x: f64,
    pub v_y: f64,
}

impl GaussianProcessSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m < 2 {
            return Err(Error::arg(format!("group sizes must be at least 2 (n={}, m={})", self.n, self.m)));
        }
        for v in [self.v_xy, self.v_x, self.v_y] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::arg(format!("variances must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// One realisation of `(b, c, d)` laid out as a symmetric pair matrix:
    /// cross entries hold `b_ij`, within-sample entries hold `-c` and `-d`,
    /// so that the permuted statistic over it is `V(Γ)`.
    pub fn draw_matrix<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> KernelMatrix {
        let size = self.n + self.m;
        let (sx, sy, sxy) = (self.v_x.sqrt(), self.v_y.sqrt(), self.v_xy.sqrt());
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            for j in i + 1..size {
                let z: f64 = StandardNormal.sample(rng);
                let v = match (i < self.n, j < self.n) {
                    (true, true) => -sx * z,
                    (false, false) => -sy * z,
                    _ => sxy * z,
                };
                values[i * size + j] = v;
                values[j * size + i] = v;
            }
        }
        KernelMatrix::from_symmetric(values, self.n, self.m).expect("symmetric by construction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub draws: usize,
}

impl PowerEstimate {
    pub fn from_count(hits: usize, draws: usize) -> Self {
        let r = hits as f64 / draws as f64;
        PowerEstimate { estimate: r, standard_error: (r * (1.0 - r) / draws as f64).sqrt(), draws }
    }
}

pub const MIN_POWER_DRAWS: usize = 1000;

/// Monte Carlo estimate of the fixed-sample-size power limit: the probability
/// that `V(Γ_0)` strictly exceeds the `(1 - alpha)` quantile of `V` over the
/// plan's permutations.
pub fn power_limit_mc(
    gp: &GaussianProcessSpec,
    alpha: f64,
    plan: &PermutationPlan,
    draws: usize,
) -> Result<PowerEstimate> {
    gp.validate()?;
    if draws < MIN_POWER_DRAWS {
        return Err(Error::arg(format!("need at least {MIN_POWER_DRAWS} draws, got {draws}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::arg(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (n, m) = (gp.n, gp.m);
    let fixed: Option<Vec<(Grouping, usize)>> = match plan.mode {
        PlanMode::ExactEnumeration => Some(plan.groupings(n, m)?),
        PlanMode::MonteCarlo => {
            plan.resolved_count(n + m)?;
            None
        }
    };
    let identity = Grouping::identity(n, m);
    let rejections = crate::par::map_indexed(draws, |d| -> Result<bool> {
        let mut rng = seed::rng(seed::derive(plan.seed, &[seed::tag::DRAW, d as u64]));
        let km = gp.draw_matrix(&mut rng);
        let observed = km.statistic_for(&identity);
        let dist = match &fixed {
            Some(g) => distribution_over(&km, g, plan.summary(n, m)),
            None => {
                let per_draw = plan
                    .clone()
                    .with_seed(seed::derive(plan.seed, &[seed::tag::PERMUTATION, d as u64]));
                distribution_over(&km, &per_draw.groupings(n, m)?, per_draw.summary(n, m))
            }
        };
        Ok(observed > dist.critical_value(alpha)?)
    });
    let hits = rejections.into_iter().collect::<Result<Vec<_>>>()?.into_iter().filter(|&r| r).count();
    Ok(PowerEstimate::from_count(hits, draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permutation::{factorial, s_w_cardinality};
    use num_traits::One;

    fn consts(e: f64, v: f64) -> MomentConstants {
        MomentConstants::new(e, e, e, v, v, v).unwrap()
    }

    /// Pair-count form of the variance: sums squared weights per pair type.
    fn sigma2_grouped(n: usize, m: usize, w: usize, c: &MomentConstants, spec: &KernelSpec) -> f64 {
        let (nf, mf, wf) = (n as f64, m as f64, w as f64);
        let g = |v: f64, e: f64| if v == 0.0 { 0.0 } else { v * spec.phi_prime(e).unwrap().powi(2) };
        let (tx, ty, txy) = (g(c.v_x, c.e_x), g(c.v_y, c.e_y), g(c.v_xy, c.e_xy));
        4.0 / (nf * nf * (nf - 1.0) * (nf - 1.0))
            * ((nf - wf) * (nf - wf - 1.0) / 2.0 * tx + wf * (wf - 1.0) / 2.0 * ty + (nf - wf) * wf * txy)
            + 4.0 / (mf * mf * (mf - 1.0) * (mf - 1.0))
                * (wf * (wf - 1.0) / 2.0 * tx + (mf - wf) * (mf - wf - 1.0) / 2.0 * ty + wf * (mf - wf) * txy)
            + 4.0 / (nf * nf * mf * mf)
                * ((nf - wf) * wf * tx + wf * (mf - wf) * ty + ((nf - wf) * (mf - wf) + wf * wf) * txy)
    }

    #[test]
    fn f_w_endpoints() {
        assert_eq!(f_w(4, 7, 0).unwrap(), 1.0);
        for n in 2..20 {
            assert!((f_w(n, n, n).unwrap() - 1.0).abs() < 1e-12);
            assert!(f_w_exact(n, n, n).unwrap().is_one());
        }
        assert!(f_w(3, 3, 4).is_err());
        assert!(f_w(1, 3, 0).is_err());
    }

    #[test]
    fn f_w_has_zero_hypergeometric_mean() {
        for n in 2..=12 {
            for m in 2..=12 {
                let law = HypergeometricLaw::new(n, m).unwrap();
                let mean: BigRational =
                    law.support().map(|w| law.pmf_exact(w) * f_w_exact(n, m, w).unwrap()).sum();
                assert!(mean.is_zero(), "n={n} m={m}: {mean}");
            }
        }
    }

    #[test]
    fn f_w_bounded_by_one() {
        for n in 2..=50 {
            for m in 2..=50 {
                for w in 0..=n.min(m) {
                    assert!(f_w(n, m, w).unwrap() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mu_examples() {
        let spec = KernelSpec::l1();
        let c = consts(1.5, 1.0);
        for w in 0..=4 {
            assert_eq!(mu_nw(4, 6, w, &c, &spec).unwrap(), 0.0);
        }
        let c = MomentConstants::new(1.0, 1.0, 2.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(mu_nw(5, 5, 0, &c, &spec).unwrap(), 2.0);
        // pair-count form before collecting powers of w
        let (n, m, w) = (5.0f64, 5.0f64, 2.0f64);
        let (pxy, px, py) = (2.0, 1.0, 1.0);
        let direct = 2.0 / (m * n) * ((w * w + (n - w) * (m - w)) * pxy + (n - w) * w * px + (m - w) * w * py)
            - 1.0 / (n * (n - 1.0)) * (2.0 * w * (n - w) * pxy + (n - w) * (n - w - 1.0) * px + w * (w - 1.0) * py)
            - 1.0 / (m * (m - 1.0)) * (2.0 * w * (m - w) * pxy + w * (w - 1.0) * px + (m - w) * (m - w - 1.0) * py);
        assert!((mu_nw(5, 5, 2, &c, &spec).unwrap() - direct).abs() < 1e-14);
        assert!((direct - 2.0 * f_w(5, 5, 2).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn mu_domain_error() {
        let c = MomentConstants { e_x: -1.0, e_y: 1.0, e_xy: 1.0, v_x: 0.0, v_y: 0.0, v_xy: 0.0 };
        assert!(mu_nw(3, 3, 0, &c, &KernelSpec::l2()).is_err());
    }

    #[test]
    fn sigma2_at_zero_crossings() {
        let spec = KernelSpec::l2();
        let c = MomentConstants::new(1.0, 2.0, 3.0, 0.5, 1.5, 2.5).unwrap();
        let (n, m) = (6.0, 9.0);
        let d = |e: f64| 0.5 / f64::sqrt(e);
        let expected = 4.0 / (n * m) * 2.5 * d(3.0).powi(2)
            + 2.0 / (n * (n - 1.0)) * 0.5 * d(1.0).powi(2)
            + 2.0 / (m * (m - 1.0)) * 1.5 * d(2.0).powi(2);
        assert!((sigma2_nw(6, 9, 0, &c, &spec).unwrap() - expected).abs() < 1e-15);
        assert_eq!(sigma2_nw(6, 9, 3, &consts(1.0, 0.0), &spec).unwrap(), 0.0);
    }

    #[test]
    fn sigma2_matches_grouped_form() {
        let spec = KernelSpec::laplacian(1.3).unwrap();
        let c = MomentConstants::new(0.7, 1.1, 0.9, 0.3, 2.0, 1.4).unwrap();
        for n in 2..=30 {
            for m in 2..=30 {
                for w in 0..=n.min(m) {
                    let a = sigma2_nw(n, m, w, &c, &spec).unwrap();
                    let b = sigma2_grouped(n, m, w, &c, &spec);
                    assert!(((a - b) / b).abs() < 1e-10, "n={n} m={m} w={w}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn pmf_examples() {
        let law = HypergeometricLaw::new(1, 1).unwrap();
        assert_eq!(law.pmf_exact(0), rat(1, 2));
        assert_eq!(law.pmf_exact(1), rat(1, 2));
        let law = HypergeometricLaw::new(2, 2).unwrap();
        assert_eq!(law.pmf_exact(1), rat(2, 3));
        assert!(law.pmf_exact(3).is_zero());
        let total: f64 = HypergeometricLaw::new(7, 4).unwrap().support().map(|w| law.pmf(w)).sum();
        assert!(total.is_finite());
    }

    #[test]
    fn pmf_matches_s_w_cardinality() {
        for n in 1..=8 {
            for m in 1..=8 {
                let law = HypergeometricLaw::new(n, m).unwrap();
                let total = factorial(n + m);
                let mut sum = BigRational::zero();
                for w in law.support() {
                    let pmf = law.pmf_exact(w);
                    sum += pmf.clone();
                    if n >= 2 && m >= 2 {
                        let card = s_w_cardinality(n, m, w).unwrap();
                        assert_eq!(pmf * BigRational::from(BigInt::from(total.clone())), BigRational::from(BigInt::from(card)));
                    }
                }
                assert!(sum.is_one());
            }
        }
    }

    #[test]
    fn hdmss_examples() {
        let spec = KernelSpec::l2();
        let c = consts(2.0, 4.0);
        let g2 = 1.0 / 8.0;
        assert!((sigma2_hdmss(1.0, &c, &spec).unwrap() - 8.0 * 4.0 * g2).abs() < 1e-14);
        let c = MomentConstants::new(1.0, 3.0, 2.0, 0.5, 2.0, 1.0).unwrap();
        let a = sigma2_hdmss(2.5, &c, &spec).unwrap();
        let b = sigma2_hdmss(1.0 / 2.5, &c.swapped(), &spec).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!(sigma2_hdmss(0.0, &c, &spec).is_err());
    }

    #[test]
    fn hdmss_is_limit_of_scaled_fixed_variance() {
        let spec = KernelSpec::l2();
        let c = MomentConstants::new(1.0, 1.5, 1.2, 2.0, 1.0, 3.0).unwrap();
        for (n, m) in [(200usize, 200usize), (400, 200)] {
            let w = ((n * m) as f64 / (n + m) as f64).round() as usize;
            let scaled = (n * m) as f64 * sigma2_nw(n, m, w, &c, &spec).unwrap();
            let limit = sigma2_hdmss(n as f64 / m as f64, &c, &spec).unwrap();
            assert!(((scaled - limit) / limit).abs() < 0.02, "{scaled} vs {limit}");
        }
    }

    #[test]
    fn mixture_cdf_basics() {
        let spec = KernelSpec::l1();
        let c = MomentConstants::new(1.0, 1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((mixture_normal_cdf(1e6, 3, 3, &c, &spec).unwrap() - 1.0).abs() < 1e-12);
        assert!((mixture_normal_cdf(0.0, 3, 3, &c, &spec).unwrap() - 0.5).abs() < 1e-12);
        let zero = consts(1.0, 0.0);
        assert_eq!(mixture_normal_cdf(0.0, 3, 3, &zero, &spec).unwrap(), 1.0);
        assert_eq!(mixture_normal_cdf(-0.1, 3, 3, &zero, &spec).unwrap(), 0.0);
    }

    #[test]
    fn mixture_cdf_matches_two_stage_simulation() {
        use rand::Rng;
        let spec = KernelSpec::l1();
        let c = MomentConstants::new(1.0, 1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        let (n, m, a) = (3usize, 3usize, 0.5);
        let exact = mixture_normal_cdf(a, n, m, &c, &spec).unwrap();
        // draw W by shuffling labels, then a Gaussian with the matching variance
        let mut rng = seed::rng(2024);
        let draws = 400_000;
        let mut hits = 0usize;
        for _ in 0..draws {
            let perm = crate::statistic::Permutation::random(n + m, &mut rng);
            let w = crate::permutation::n_of_gamma(&perm, n, m);
            let sd = sigma2_nw(n, m, w, &c, &spec).unwrap().sqrt();
            let z: f64 = StandardNormal.sample(&mut rng);
            hits += (sd * z <= a) as usize;
            let _ = rng.random::<u8>();
        }
        let mc = hits as f64 / draws as f64;
        assert!((mc - exact).abs() < 0.005, "{mc} vs {exact}");
    }

    #[test]
    fn power_limit_zero_variances() {
        let gp = GaussianProcessSpec { n: 3, m: 3, v_xy: 0.0, v_x: 0.0, v_y: 0.0 };
        let est = power_limit_mc(&gp, 0.05, &PermutationPlan::exact(), 1000).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn power_limit_argument_checks() {
        let gp = GaussianProcessSpec { n: 3, m: 3, v_xy: 1.0, v_x: 1.0, v_y: 1.0 };
        assert!(power_limit_mc(&gp, 0.05, &PermutationPlan::exact(), 10).is_err());
        assert!(power_limit_mc(&gp, 1.5, &PermutationPlan::exact(), 1000).is_err());
        let bad = GaussianProcessSpec { v_x: -1.0, ..gp };
        assert!(power_limit_mc(&bad, 0.05, &PermutationPlan::exact(), 1000).is_err());
    }

    #[test]
    fn power_limit_monte_carlo_plan_runs() {
        let gp = GaussianProcessSpec { n: 4, m: 3, v_xy: 0.25, v_x: 4.0, v_y: 4.0 };
        let plan = PermutationPlan::monte_carlo(60, 5);
        let a = power_limit_mc(&gp, 0.05, &plan, 1000).unwrap();
        let b = power_limit_mc(&gp, 0.05, &plan, 1000).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate > 0.05, "{a:?}");
    }
}
