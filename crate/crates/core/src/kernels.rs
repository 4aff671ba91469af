//! Dissimilarity metrics `k(x, y) = phi(psi_bar(x, y))` with
//! `psi_bar(x, y) = (1/p) * sum_u psi(x_u, y_u)`.
//!
//! | family      | psi(a, b)   | phi(t)                  |
//! |-------------|-------------|-------------------------|
//! | `L2`        | `(a - b)^2` | `sqrt(t)`               |
//! | `Gaussian`  | `(a - b)^2` | `-exp(-t / (2 g^2))`    |
//! | `Laplacian` | `(a - b)^2` | `-exp(-sqrt(t) / g)`    |
//! | `L1`        | `abs(a - b)`| `t`                     |
//!
//! The Gaussian and Laplacian kernels are kept in their negated form so that
//! `phi` is increasing for every family and a larger statistic always means a
//! larger discrepancy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BANDWIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    L2,
    L1,
    Gaussian,
    Laplacian,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::L2,
        KernelFamily::Gaussian,
        KernelFamily::Laplacian,
        KernelFamily::L1,
    ];

    pub fn psi(self) -> Psi {
        match self {
            KernelFamily::L1 => Psi::Absolute,
            _ => Psi::Squared,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            KernelFamily::L2 => "l2",
            KernelFamily::L1 => "l1",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(KernelFamily::L2),
            "l1" => Ok(KernelFamily::L1),
            "gaussian" => Ok(KernelFamily::Gaussian),
            "laplacian" => Ok(KernelFamily::Laplacian),
            other => Err(Error::arg(format!(
                "unknown kernel '{other}' (expected l2, l1, gaussian or laplacian)"
            ))),
        }
    }
}

/// Per-coordinate dissimilarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Psi {
    Squared,
    Absolute,
}

impl Psi {
    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        let d = a - b;
        match self {
            Psi::Squared => d * d,
            Psi::Absolute => d.abs(),
        }
    }

    /// `(1/p) * sum_u psi(x_u, y_u)` without argument checks.
    #[inline]
    pub fn mean(self, x: &[f64], y: &[f64]) -> f64 {
        let s: f64 = match self {
            Psi::Squared => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum(),
            Psi::Absolute => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        };
        s / x.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Only read by the Gaussian and Laplacian families.
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if matches!(family, KernelFamily::Gaussian | KernelFamily::Laplacian)
            && !(bandwidth.is_finite() && bandwidth > 0.0)
        {
            return Err(Error::arg(format!(
                "{family} kernel needs a positive finite bandwidth, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { family, bandwidth })
    }

    pub fn l2() -> Self {
        KernelSpec { family: KernelFamily::L2, bandwidth: DEFAULT_BANDWIDTH }
    }

    pub fn l1() -> Self {
        KernelSpec { family: KernelFamily::L1, bandwidth: DEFAULT_BANDWIDTH }
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn laplacian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplacian, bandwidth)
    }

    pub fn psi(&self) -> Psi {
        self.family.psi()
    }

    /// `phi(t)` for `t >= 0`. No domain check; see [`KernelSpec::phi_checked`].
    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        let g = self.bandwidth;
        match self.family {
            KernelFamily::L2 => t.sqrt(),
            KernelFamily::L1 => t,
            KernelFamily::Gaussian => -(-t / (2.0 * g * g)).exp(),
            KernelFamily::Laplacian => -(-t.sqrt() / g).exp(),
        }
    }

    pub fn phi_checked(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain(format!("phi is defined on [0, inf), got {t}")));
        }
        Ok(self.phi(t))
    }

    /// First derivative of `phi`.
    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Domain(format!("phi' is defined on (0, inf), got {t}")));
        }
        let g = self.bandwidth;
        match self.family {
            KernelFamily::L1 => Ok(1.0),
            KernelFamily::Gaussian => Ok((-t / (2.0 * g * g)).exp() / (2.0 * g * g)),
            KernelFamily::L2 | KernelFamily::Laplacian if t == 0.0 => Err(Error::Domain(
                format!("phi' of the {} kernel is singular at 0", self.family),
            )),
            KernelFamily::L2 => Ok(0.5 / t.sqrt()),
            KernelFamily::Laplacian => {
                let r = t.sqrt();
                Ok((-r / g).exp() / (2.0 * g * r))
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Gaussian | KernelFamily::Laplacian => {
                write!(f, "{}(gamma={})", self.family, self.bandwidth)
            }
            _ => write!(f, "{}", self.family),
        }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("vectors of length {} and {}", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::Domain("vectors must have at least one coordinate".into()));
    }
    Ok(())
}

/// Average per-coordinate dissimilarity `(1/p) * sum_u psi(x_u, y_u)`.
pub fn psi_bar(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_pair(x, y)?;
    Ok(spec.psi().mean(x, y))
}

pub fn kernel_eval(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    Ok(spec.phi(psi_bar(x, y, spec)?))
}

pub fn phi_prime(spec: &KernelSpec, t: f64) -> Result<f64> {
    spec.phi_prime(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn all_specs() -> Vec<KernelSpec> {
        vec![
            KernelSpec::l2(),
            KernelSpec::l1(),
            KernelSpec::gaussian(1.3).unwrap(),
            KernelSpec::laplacian(0.7).unwrap(),
        ]
    }

    #[test]
    fn psi_bar_examples() {
        let x = [1.0, 2.0];
        let y = [4.0, 6.0];
        assert_eq!(psi_bar(&x, &y, &KernelSpec::l2()).unwrap(), 12.5);
        assert_eq!(psi_bar(&x, &y, &KernelSpec::l1()).unwrap(), 3.5);
        for s in all_specs() {
            assert_eq!(psi_bar(&x, &x, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn psi_bar_errors() {
        assert!(matches!(
            psi_bar(&[1.0], &[1.0, 2.0], &KernelSpec::l2()),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(psi_bar(&[], &[], &KernelSpec::l2()), Err(Error::Domain(_))));
    }

    #[test]
    fn kernel_eval_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(kernel_eval(&[3.0, 1.0], &[3.0, 1.0], &g).unwrap(), -1.0);
        assert_eq!(kernel_eval(&[3.0], &[3.0], &KernelSpec::l2()).unwrap(), 0.0);
        assert_close(
            kernel_eval(&[1.0, 2.0], &[4.0, 6.0], &KernelSpec::l2()).unwrap(),
            3.535_533_905_932_737_6,
            1e-12
        );
    }

    #[test]
    fn phi_at_zero() {
        assert_eq!(KernelSpec::l2().phi(0.0), 0.0);
        assert_eq!(KernelSpec::l1().phi(0.0), 0.0);
        assert_eq!(KernelSpec::gaussian(2.0).unwrap().phi(0.0), -1.0);
        assert_eq!(KernelSpec::laplacian(2.0).unwrap().phi(0.0), -1.0);
    }

    #[test]
    fn phi_prime_examples() {
        assert_eq!(KernelSpec::l1().phi_prime(7.0).unwrap(), 1.0);
        assert_eq!(KernelSpec::l2().phi_prime(4.0).unwrap(), 0.25);
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_close(g.phi_prime(2.0).unwrap(), 0.5 * (-1.0f64).exp(), 1e-15);
        assert_close(g.phi_prime(2.0).unwrap(), 0.183_939_7, 1e-7);
    }

    #[test]
    fn phi_prime_domain() {
        assert!(KernelSpec::l2().phi_prime(0.0).is_err());
        assert!(KernelSpec::laplacian(1.0).unwrap().phi_prime(0.0).is_err());
        assert!(KernelSpec::l2().phi_prime(-1.0).is_err());
        assert!(KernelSpec::gaussian(1.0).unwrap().phi_prime(0.0).is_ok());
    }

    #[test]
    fn phi_prime_matches_central_difference() {
        for s in all_specs() {
            for &t in &[0.5, 1.0, 2.0, 10.0] {
                let h = 1e-5 * t;
                let fd = (s.phi(t + h) - s.phi(t - h)) / (2.0 * h);
                let d = s.phi_prime(t).unwrap();
                assert!(((fd - d) / d).abs() < 1e-6, "{s} at {t}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn bandwidth_validation() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplacian(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
        assert!(KernelSpec::new(KernelFamily::L2, -1.0).is_ok());
    }

    #[test]
    fn tokens_round_trip() {
        for f in KernelFamily::ALL {
            assert_eq!(f.token().parse::<KernelFamily>().unwrap(), f);
        }
        assert!("l3".parse::<KernelFamily>().is_err());
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(
            v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            for s in all_specs() {
                prop_assert_eq!(kernel_eval(&x, &y, &s).unwrap(), kernel_eval(&y, &x, &s).unwrap());
            }
        }

        #[test]
        fn l2_is_scaled_euclidean_norm(
            v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let norm = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let k = kernel_eval(&x, &y, &KernelSpec::l2()).unwrap();
            prop_assert!((k - norm / (x.len() as f64).sqrt()).abs() <= 1e-12 * (1.0 + norm));
        }
    }
}
