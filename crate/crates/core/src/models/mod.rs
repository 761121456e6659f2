//! Gaussian drivers and stochastic-volatility models.

mod bergomi;
mod driver;
mod gbm;
mod generic;

pub use bergomi::{
    rbergomi_variance, simulate_price, simulate_tilde_y, BergomiPath, BergomiSimulator, ForwardVariance,
    RoughBergomiParams,
};
pub use driver::{rl_covariance, sample_driver, DriverStream, GaussianDriver, RlDriverSampler, CHOLESKY_JITTER};
pub use gbm::Gbm;
pub use generic::{
    affine_mean_curve, simulate_affine, AffinePaths, AffineVolterraParams, GenericPath, GenericSVSpec, GenericSimulator,
};
