use std::f64::consts::E;

use super::{exact, BoundReport};
use crate::error::{input, usage, Result};
use crate::grid::SamplePath;
use crate::quadrature::{integrate_to_infinity, Tolerance};
use crate::stats::{normal_cdf, normal_pdf, MCEstimate};

/// `e / (e - 1)`.
pub const DOOB_CONSTANT: f64 = E / (E - 1.0);

/// Mean of the per-path grid maxima.
pub fn estimate_sup<I>(paths: I) -> Result<MCEstimate>
where
    I: IntoIterator<Item = SamplePath>,
{
    let maxima: Vec<f64> = paths.into_iter().map(|p| p.max()).collect();
    estimate_sup_values(&maxima)
}

/// Same as [`estimate_sup`] for precomputed maxima.
pub fn estimate_sup_values(maxima: &[f64]) -> Result<MCEstimate> {
    if maxima.is_empty() {
        return usage("supremum estimate needs at least 2 paths, got an empty stream");
    }
    if maxima.len() < 2 {
        return usage("supremum estimate needs at least 2 paths, got 1");
    }
    MCEstimate::from_samples(maxima)
}

/// Doob's L¹ inequality with the Monte Carlo `x log x` term it uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoobReport {
    pub bound: BoundReport,
    /// `E[X_T log X_T]`
    pub xlogx: MCEstimate,
}

/// `E[sup X] ≤ e/(e-1) (E[X_T log X_T] + X0 (1 - log X0))` for a positive
/// submartingale.
pub fn doob_l1_check<I>(paths: I, x0: f64) -> Result<DoobReport>
where
    I: IntoIterator<Item = SamplePath>,
{
    let mut sups = Vec::new();
    let mut terminals = Vec::new();
    for (j, p) in paths.into_iter().enumerate() {
        if let Some(i) = p.values().iter().position(|x| !(*x > 0.0)) {
            return input(format!("Doob check needs positive paths; path {j} has {} at node {i}", p.at(i)));
        }
        sups.push(p.max());
        terminals.push(p.terminal());
    }
    doob_l1_from_samples(&sups, &terminals, x0)
}

pub fn doob_l1_from_samples(sups: &[f64], terminals: &[f64], x0: f64) -> Result<DoobReport> {
    if sups.len() != terminals.len() {
        return usage(format!("{} suprema but {} terminal values", sups.len(), terminals.len()));
    }
    if !(x0 > 0.0) {
        return input(format!("Doob check needs X0 > 0, got {x0}"));
    }
    if let Some(x) = sups.iter().chain(terminals).find(|x| !(**x > 0.0 && x.is_finite())) {
        return input(format!("Doob check needs positive finite values, got {x}"));
    }
    let lhs = estimate_sup_values(sups)?;
    let xlogx_samples: Vec<f64> = terminals.iter().map(|x| x * x.ln()).collect();
    let xlogx = MCEstimate::from_samples(&xlogx_samples)?;
    let offset = x0 * (1.0 - x0.ln());
    let rhs = MCEstimate::new(DOOB_CONSTANT * (xlogx.mean + offset), DOOB_CONSTANT * xlogx.stderr, xlogx.n);
    Ok(DoobReport { bound: BoundReport::upper(lhs, rhs), xlogx })
}

/// `E[sup X] ≥ 1 + E[X_∞ log⁺ X_∞]` for a continuous non-negative
/// martingale; samples are divided by `x0` first.
pub fn reverse_l1_check(sups: &[f64], closing: &[f64], x0: f64) -> Result<BoundReport> {
    if sups.len() != closing.len() {
        return usage(format!("{} suprema but {} closing values", sups.len(), closing.len()));
    }
    if !(x0 > 0.0) {
        return input(format!("reverse L1 check needs X0 > 0, got {x0}"));
    }
    if let Some(x) = closing.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return input(format!("closing values must be finite and ≥ 0, got {x}"));
    }
    let scaled: Vec<f64> = sups.iter().map(|s| s / x0).collect();
    let lhs = estimate_sup_values(&scaled)?;
    let terms: Vec<f64> = closing
        .iter()
        .map(|x| {
            let y = x / x0;
            if y > 1.0 {
                y * y.ln()
            } else {
                0.0
            }
        })
        .collect();
    let tail = MCEstimate::from_samples(&terms)?;
    let rhs = MCEstimate::new(1.0 + tail.mean, tail.stderr, tail.n);
    Ok(BoundReport::lower(lhs, if tail.stderr == 0.0 { exact(rhs.mean) } else { rhs }))
}

/// `E[X_T log X_T] = sigma^2 T / 2` for GBM started at 1.
pub fn gbm_xlogx(sigma: f64, horizon: f64) -> f64 {
    0.5 * sigma * sigma * horizon
}

/// `E[X_T log⁺ X_T]` for GBM started at 1: under the share measure `log X_T`
/// is normal with mean `s^2/2` and variance `s^2`, `s = sigma sqrt(T)`.
pub fn gbm_xlogx_plus(sigma: f64, horizon: f64) -> f64 {
    let s = sigma * horizon.sqrt();
    if s == 0.0 {
        return 0.0;
    }
    let m = 0.5 * s * s;
    m * normal_cdf(m / s) + s * normal_pdf(m / s)
}

/// Same quantity by quadrature against the lognormal law.
pub fn gbm_xlogx_plus_quadrature(sigma: f64, horizon: f64) -> Result<f64> {
    let s = sigma * horizon.sqrt();
    if s == 0.0 {
        return Ok(0.0);
    }
    // x φ(z) = φ(z - s) with log x = s z - s^2/2.
    integrate_to_infinity(|z| (s * z - 0.5 * s * s) * normal_pdf(z - s), 0.5 * s, Tolerance::relative(1e-12))
}
