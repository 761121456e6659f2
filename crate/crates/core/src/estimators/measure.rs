use std::cmp::Ordering;

use rand::Rng;

use super::bounds::MonteCarloConfig;
use super::VIOLATION_SIGMAS;
use crate::error::{input, usage, Result};
use crate::models::{BergomiSimulator, RoughBergomiParams};
use crate::parallel::{map_indexed, try_map_indexed};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::stats::{neumaier_sum, MCEstimate};

/// Bootstrap replicates used by [`share_measure_check`].
pub const BOOTSTRAP_REPLICATES: usize = 999;

/// Effective sample size below which the weights are reported as degenerate.
pub const MIN_EFFECTIVE_SAMPLE: f64 = 100.0;

/// Result of a weighted two-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub replicates: usize,
    /// `(Σ w)^2 / Σ w^2` of the weighted sample.
    pub effective_sample_size: f64,
}

fn by_value(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(Ordering::Equal).then(i.cmp(&j)));
    idx
}

/// Merged order of both samples: each entry is `(from_a, position)` and the
/// entries between consecutive `breaks` share one value.
struct Merged {
    order: Vec<(bool, usize)>,
    breaks: Vec<usize>,
}

fn merge(a: &[f64], b: &[f64]) -> Merged {
    let ia = by_value(a);
    let ib = by_value(b);
    let mut order = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < ia.len() || j < ib.len() {
        let take_a = j == ib.len() || (i < ia.len() && a[ia[i]] <= b[ib[j]]);
        if take_a {
            order.push((true, ia[i]));
            i += 1;
        } else {
            order.push((false, ib[j]));
            j += 1;
        }
    }
    let value = |e: &(bool, usize)| if e.0 { a[e.1] } else { b[e.1] };
    let mut breaks = Vec::new();
    for k in 1..=order.len() {
        if k == order.len() || value(&order[k]) != value(&order[k - 1]) {
            breaks.push(k);
        }
    }
    Merged { order, breaks }
}

/// Largest gap between the weighted cdf of `a` and the plain cdf of `b`,
/// with per-observation multiplicities `ca`, `cb` and an optional centring
/// curve evaluated at every break.
fn sweep(m: &Merged, wa: &[f64], ca: &[f64], cb: &[f64], centre: Option<&[f64]>, trace: Option<&mut Vec<f64>>) -> f64 {
    let total_a = neumaier_sum(wa.iter().zip(ca).map(|(w, c)| w * c));
    let total_b = neumaier_sum(cb.iter().copied());
    let mut fa = 0.0f64;
    let mut fb = 0.0f64;
    let mut start = 0;
    let mut best = 0.0f64;
    let mut trace = trace;
    for (k, &end) in m.breaks.iter().enumerate() {
        for &(from_a, idx) in &m.order[start..end] {
            if from_a {
                fa += wa[idx] * ca[idx];
            } else {
                fb += cb[idx];
            }
        }
        start = end;
        let d = fa / total_a - fb / total_b;
        if let Some(t) = trace.as_deref_mut() {
            t.push(d);
        }
        let c = centre.map_or(0.0, |c| c[k]);
        best = best.max((d - c).abs());
    }
    best
}

/// `sup_x |F_w(x) - G(x)|` with `F_w` the `weights`-weighted empirical cdf
/// of `a` and `G` the empirical cdf of `b`.
pub fn weighted_ks(a: &[f64], weights: &[f64], b: &[f64]) -> Result<f64> {
    validate(a, weights, b)?;
    let m = merge(a, b);
    Ok(sweep(&m, weights, &vec![1.0; a.len()], &vec![1.0; b.len()], None, None))
}

fn validate(a: &[f64], weights: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != weights.len() {
        return usage(format!("{} observations but {} weights", a.len(), weights.len()));
    }
    if a.is_empty() || b.is_empty() {
        return usage("KS test needs two non-empty samples");
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return input("KS samples must be finite");
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || !weights.iter().any(|w| *w > 0.0) {
        return input("KS weights must be finite, non-negative and not all zero");
    }
    Ok(())
}

fn counts(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for _ in 0..n {
        c[rng.random_range(0..n)] += 1.0;
    }
    c
}

/// Weighted KS statistic with a centred bootstrap p-value.
///
/// Each replicate resamples both samples with replacement (the weights stay
/// attached to their observations) and measures the deviation of the
/// resampled cdf difference from the observed one.
pub fn weighted_ks_test(a: &[f64], weights: &[f64], b: &[f64], replicates: usize, seed: u64) -> Result<KsTest> {
    validate(a, weights, b)?;
    let m = merge(a, b);
    let mut curve = Vec::with_capacity(m.breaks.len());
    let statistic = sweep(&m, weights, &vec![1.0; a.len()], &vec![1.0; b.len()], None, Some(&mut curve));
    let boot = map_indexed(replicates as u64, |r| {
        let mut rng = stream_rng(seed, Stream::Bootstrap, r);
        let ca = counts(a.len(), &mut rng);
        let cb = counts(b.len(), &mut rng);
        sweep(&m, weights, &ca, &cb, Some(&curve), None)
    });
    let exceed = boot.iter().filter(|d| **d >= statistic).count();
    let sw = neumaier_sum(weights.iter().copied());
    let sw2 = neumaier_sum(weights.iter().map(|w| w * w));
    Ok(KsTest {
        statistic,
        p_value: (1 + exceed) as f64 / (1 + replicates) as f64,
        replicates,
        effective_sample_size: sw * sw / sw2,
    })
}

/// What the tilted sample is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureMode {
    /// `Y_T` weighted by `S_T / S0`: the laws agree.
    ShareMeasure,
    /// `Y_T` without weights: a negative control whose laws differ when
    /// `rho ≠ 0`.
    Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShareMeasureReport {
    pub mode: MeasureMode,
    pub test: KsTest,
    /// `E[S_T]` over the weighted sample.
    pub terminal: MCEstimate,
    pub martingale_ok: bool,
    pub warnings: Vec<String>,
}

/// Compare the `S_T`-weighted law of `Y_T` with the law of `Ỹ_T` using two
/// independent sets of paths.
pub fn share_measure_check(
    p: &RoughBergomiParams,
    cfg: &MonteCarloConfig,
    mode: MeasureMode,
) -> Result<ShareMeasureReport> {
    let grid = cfg.validate()?;
    let sim = BergomiSimulator::new(p.clone(), grid)?;
    let n = grid.n_steps();
    let weighted = try_map_indexed(cfg.n_paths, |i| {
        let (driver, s) = sim.price_path(cfg.seed, i)?;
        Ok((driver.y.at(n), s.terminal()))
    })?;
    let tilted_seed = derive_seed(cfg.seed, 1);
    let tilted = try_map_indexed(cfg.n_paths, |i| {
        let driver = sim.sampler().sample(tilted_seed, i);
        Ok::<_, crate::Error>(sim.tilde_y(&driver)?.at(n))
    })?;
    let y: Vec<f64> = weighted.iter().map(|x| x.0).collect();
    let s_t: Vec<f64> = weighted.iter().map(|x| x.1).collect();
    let terminal = MCEstimate::from_samples(&s_t)?;
    let weights: Vec<f64> = match mode {
        MeasureMode::ShareMeasure => s_t.iter().map(|s| s / p.s0()).collect(),
        MeasureMode::Control => vec![1.0; s_t.len()],
    };
    let test = weighted_ks_test(&y, &weights, &tilted, BOOTSTRAP_REPLICATES, derive_seed(cfg.seed, 2))?;
    let martingale_ok = terminal.within(p.s0(), VIOLATION_SIGMAS);
    let mut warnings = Vec::new();
    if test.effective_sample_size < MIN_EFFECTIVE_SAMPLE {
        warnings.push(format!(
            "numeric: weight degeneracy, effective sample size {:.1} < {MIN_EFFECTIVE_SAMPLE}",
            test.effective_sample_size
        ));
    }
    if !martingale_ok {
        warnings.push(format!(
            "E[S_T] = {:.6} ± {:.6} is not within 3 standard errors of S0 = {}",
            terminal.mean,
            terminal.stderr,
            p.s0()
        ));
    }
    Ok(ShareMeasureReport { mode, test, terminal, martingale_ok, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_have_zero_statistic() {
        let a = [0.3, -1.0, 2.0, 0.3];
        assert_eq!(weighted_ks(&a, &[1.0; 4], &a).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_samples_have_unit_statistic() {
        let d = weighted_ks(&[0.0, 1.0], &[1.0, 3.0], &[5.0, 6.0, 7.0]).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn weights_shift_the_cdf() {
        // F_w jumps 0.25 at 0 and 0.75 at 1; G jumps 0.5 at 0 and at 1.
        let d = weighted_ks(&[0.0, 1.0], &[1.0, 3.0], &[0.0, 1.0]).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_is_reproducible_and_calibrated_under_the_null() {
        let a: Vec<f64> = (0..400).map(|i| ((i * 37) % 400) as f64 / 400.0).collect();
        let b: Vec<f64> = (0..300).map(|i| (i as f64 + 0.5) / 300.0).collect();
        let t1 = weighted_ks_test(&a, &vec![1.0; 400], &b, 199, 5).unwrap();
        let t2 = weighted_ks_test(&a, &vec![1.0; 400], &b, 199, 5).unwrap();
        assert_eq!(t1, t2);
        assert!(t1.p_value > 0.5);
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.3).collect();
        let t3 = weighted_ks_test(&a, &vec![1.0; 400], &shifted, 199, 5).unwrap();
        assert!(t3.p_value < 0.01);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(weighted_ks(&[1.0], &[-1.0], &[1.0]).is_err());
        assert!(weighted_ks(&[1.0], &[0.0], &[1.0]).is_err());
        assert!(weighted_ks(&[1.0, 2.0], &[1.0], &[1.0]).is_err());
    }
}
