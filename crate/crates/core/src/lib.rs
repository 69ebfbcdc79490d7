//! Kernel two-sample testing with the maximum mean discrepancy (MMD).
//!
//! The test statistic is computed on a finite-dimensional feature map, either a
//! Nyström map built from landmark points or random Fourier features, and is
//! calibrated by permutation. Permuted statistics are accumulated in a single
//! streaming pass over the pooled data, so memory stays `O(P·ℓ)` regardless of
//! sample size. An exact quadratic-time MMD test is included as a baseline.
//!
//! ```
//! use nystrom_mmd::data::{sample_correlated_gaussians, SyntheticSpec};
//! use nystrom_mmd::perm_test::{run_test, Method, RunOptions, TestConfig};
//!
//! let x = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(3, 0.5, 200, 1)).unwrap();
//! let y = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(3, 0.5, 200, 2)).unwrap();
//! let cfg = TestConfig { alpha: 0.05, permutations: 99, seed: 7 };
//! let out = run_test(&x, &y, &cfg, &Method::NystromUniform.spec(15), &RunOptions::default()).unwrap();
//! assert!(out.statistic >= 0.0);
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod features;
pub mod harness;
pub mod kernel;
pub mod landmarks;
mod linalg;
pub mod rng;
pub mod statistics;

pub use error::{Error, Result};
pub use features::{build_nystrom, build_rff, FeatureMap, NystromMap, RffMap};
pub use kernel::{Dataset, GaussianKernel};
pub use perm_test::{run_test, Method, TestConfig, TestOutcome};
pub use statistics::PooledData;
