//! Rough-volatility path simulation and supremum-integrability diagnostics.
//!
//! The crate is organised in four layers:
//!
//! - [`kernel`]: power-law Volterra kernels, exact grid weights, the
//!   pathwise Volterra solver and an Euler scheme for Volterra equations.
//! - [`models`]: exact Gaussian simulation of the Riemann–Liouville driver,
//!   rough Bergomi, generic stochastic-volatility and affine Volterra models.
//! - [`estimators`]: Monte Carlo functionals of path suprema, maximal
//!   inequality checks and the share-measure law comparison.
//! - [`pathology`]: maximal functions of distributions, the Dubins–Gilat
//!   martingale and a stopped inverse Bessel construction whose supremum is
//!   not integrable.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimators;
pub mod grid;
pub mod kernel;
pub mod models;
pub mod parallel;
pub mod pathology;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{SamplePath, TimeGrid};
pub use kernel::{DriftSpec, PowerLawKernel, QuadWeights};
pub use stats::MCEstimate;
