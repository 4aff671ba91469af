//! Interpoint-distance two-sample tests for high-dimensional data.
//!
//! The statistics covered here are the unbiased estimators of
//! `2E k(X,Y) - E k(X,X') - E k(Y,Y')` for metrics of the form
//! `k(x, y) = phi((1/p) * sum_u psi(x_u, y_u))`: the Euclidean energy
//! distance, the Gaussian and Laplacian MMD (stored negated), and the
//! L1-norm variant. Tests are calibrated by permuting pair weights over a
//! cached kernel matrix, either by full enumeration or Monte Carlo.
//!
//! Alongside the tests the crate carries the high-dimensional limit formulas
//! for permuted statistics ([`asymptotics`]), empirical regime diagnostics
//! ([`diagnostics`]), the simulation designs ([`datagen`]) and a seeded study
//! runner ([`harness`]).

pub mod asymptotics;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernels;
mod par;
pub mod permutation;
pub mod seed;
pub mod statistic;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use permutation::{permutation_test, PermutationPlan, TestResult};
pub use statistic::{build_kernel_matrix, ed_statistic, KernelMatrix, LabeledSample, Permutation};
