//! Monte Carlo summaries and small numerical helpers.

use crate::error::{usage, Result};

/// Mean, standard error and 95% interval of a Monte Carlo functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub ci95: (f64, f64),
}

impl MCEstimate {
    pub fn new(mean: f64, stderr: f64, n: u64) -> Self {
        let half = 1.96 * stderr;
        Self { mean, stderr, n, ci95: (mean - half, mean + half) }
    }

    /// Estimate from i.i.d. samples (two-pass, compensated).
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return usage(format!("an estimate needs at least 2 samples, got {}", samples.len()));
        }
        let n = samples.len() as f64;
        let mean = neumaier_sum(samples.iter().copied()) / n;
        let ss = neumaier_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
        let var = ss / (n - 1.0);
        Ok(Self::new(mean, (var / n).sqrt(), samples.len() as u64))
    }

    /// Binomial proportion estimate `hits / n`.
    pub fn proportion(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self::new(p, binomial_stderr(p, n), n)
    }

    /// Distance to `target` in units of standard error (infinite when the
    /// standard error vanishes and the mean differs).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else if self.stderr == 0.0 {
            f64::INFINITY * d.signum()
        } else {
            d / self.stderr
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target).abs() <= sigmas
    }
}

pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn variance_estimate(samples: &[f64]) -> Result<MCEstimate> {
    if samples.len() < 4 {
        return usage("a variance estimate needs at least 4 samples");
    }
    let n = samples.len() as f64;
    let mean = neumaier_sum(samples.iter().copied()) / n;
    let m2 = neumaier_sum(samples.iter().map(|x| (x - mean).powi(2))) / n;
    let m4 = neumaier_sum(samples.iter().map(|x| (x - mean).powi(4))) / n;
    let var = m2 * n / (n - 1.0);
    Ok(MCEstimate::new(var, ((m4 - m2 * m2) / n).max(0.0).sqrt(), samples.len() as u64))
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Contraction factor used by the geometric Cauchy test.
pub const CAUCHY_RATIO: f64 = 0.75;

/// Geometric Cauchy test on a sequence of non-negative series increments.
///
/// Returns `true` (convergent) when every increment is at most
/// `ratio` times its predecessor; an increment of exactly zero always passes.
pub fn geometric_cauchy(increments: &[f64], ratio: f64) -> bool {
    increments.windows(2).all(|w| w[1] <= 0.0 || w[1] <= ratio * w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_stderr() {
        let e = MCEstimate::from_samples(&[2.5; 10]).unwrap();
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.ci95, (2.5, 2.5));
    }

    #[test]
    fn one_sample_is_rejected() {
        assert!(MCEstimate::from_samples(&[1.0]).is_err());
    }

    #[test]
    fn ci_is_symmetric() {
        let e = MCEstimate::new(1.0, 0.5, 10);
        assert!((e.ci95.0 - 0.02).abs() < 1e-15);
        assert!((e.ci95.1 - 1.98).abs() < 1e-15);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
    }

    #[test]
    fn cauchy_test() {
        assert!(geometric_cauchy(&[1.0, 0.5, 0.25, 0.0, 0.0], CAUCHY_RATIO));
        assert!(!geometric_cauchy(&[1.0, 0.9, 0.8], CAUCHY_RATIO));
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        assert_eq!(neumaier_sum([1.0, 1e100, 1.0, -1e100]), 2.0);
    }
}
