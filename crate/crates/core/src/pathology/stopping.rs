use std::f64::consts::E;

use rand::Rng;

use super::bessel::{inverse_bessel_exceedance, maximal_identity, PathSummary};
use crate::error::{domain, input, usage, Result};
use crate::parallel::map_indexed;
use crate::rng::{stream_rng, Stream};
use crate::stats::{geometric_cauchy, neumaier_sum, MCEstimate, CAUCHY_RATIO};

/// Partial sums of the maximal-identity tails are summed exactly up to here.
const EXACT_TERMS: u64 = 100_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq)]
enum Tails {
    /// `p_k` for `k = 1..=len`, zero afterwards.
    Explicit,
    /// `p_k = min(1, m0 / k)`.
    DoobMaximal { m0: f64 },
}

/// `c_0 = 1`, `c_n = ln(e + Σ_{k ≤ n} p_k)` for tail probabilities `p_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CSequence {
    tails: Tails,
    /// `sums[n] = Σ_{k ≤ n} p_k` for the cached prefix.
    sums: Vec<f64>,
}

fn harmonic_asymptotic(n: f64) -> f64 {
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    n.ln() + EULER_GAMMA + 0.5 * inv - inv2 / 12.0 + inv2 * inv2 / 120.0 - inv2 * inv2 * inv2 / 252.0
}

fn prefix_sums(p: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut sums = vec![0.0];
    let (mut s, mut comp) = (0.0f64, 0.0f64);
    for v in p {
        let t = s + v;
        if s.abs() >= v.abs() {
            comp += (s - t) + v;
        } else {
            comp += (v - t) + s;
        }
        s = t;
        sums.push(s + comp);
    }
    sums
}

impl CSequence {
    /// Sequence from explicit tails `p_1, p_2, ...` (zero beyond the slice).
    pub fn from_tails(p: &[f64]) -> Result<Self> {
        if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0)) {
            return input(format!("tail probability p_{} = {v} is outside [0, 1]", k + 1));
        }
        if p.iter().all(|v| *v == 0.0) {
            return usage("all tail probabilities are zero, so c_n ≡ 1 and the level never triggers");
        }
        Ok(Self { tails: Tails::Explicit, sums: prefix_sums(p.iter().copied()) })
    }

    /// Tails `P[sup M > k] = min(1, m0 / k)` of a class C₀ martingale
    /// started at `m0`.
    pub fn doob_maximal(m0: f64) -> Result<Self> {
        if !(m0 > 0.0 && m0.is_finite()) {
            return domain(format!("M_0 must be > 0, got {m0}"));
        }
        let sums = prefix_sums((1..=EXACT_TERMS).map(|k| maximal_identity(m0, k as f64)));
        Ok(Self { tails: Tails::DoobMaximal { m0 }, sums })
    }

    /// `p_k`
    pub fn tail(&self, k: u64) -> f64 {
        match self.tails {
            Tails::Explicit => {
                if k >= 1 && (k as usize) < self.sums.len() {
                    self.sums[k as usize] - self.sums[k as usize - 1]
                } else {
                    0.0
                }
            }
            Tails::DoobMaximal { m0 } => {
                if k == 0 {
                    0.0
                } else {
                    maximal_identity(m0, k as f64)
                }
            }
        }
    }

    /// `Σ_{k ≤ n} p_k`
    pub fn tail_sum(&self, n: u64) -> f64 {
        let cached = (self.sums.len() - 1) as u64;
        if n <= cached {
            return self.sums[n as usize];
        }
        match self.tails {
            Tails::Explicit => self.sums[cached as usize],
            Tails::DoobMaximal { m0 } => {
                // Beyond the cache every term is m0 / k.
                let (a, b) = (cached as f64, n as f64);
                let diff = (b / a).ln() + 0.5 * (1.0 / b - 1.0 / a) - (1.0 / (b * b) - 1.0 / (a * a)) / 12.0;
                self.sums[cached as usize] + m0 * diff
            }
        }
    }

    pub fn c(&self, n: u64) -> f64 {
        if n == 0 {
            1.0
        } else {
            (E + self.tail_sum(n)).ln()
        }
    }

    /// `P[Θ > n] = 1 / c_n`
    pub fn survival(&self, n: u64) -> f64 {
        1.0 / self.c(n)
    }

    /// Exact `Σ_{n ≤ N} p_n / c_n`, the tail sum of the stopped supremum.
    pub fn stopped_series(&self, n: u64) -> f64 {
        neumaier_sum((1..=n).map(|k| self.tail(k) / self.c(k)))
    }
}

/// `H_n` (exact summation below 1000, asymptotic expansion above).
pub fn harmonic(n: u64) -> f64 {
    if n < 1000 {
        neumaier_sum((1..=n).rev().map(|k| 1.0 / k as f64))
    } else {
        harmonic_asymptotic(n as f64)
    }
}

/// Integer level `Θ ≥ 1`, possibly beyond every `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Finite(u64),
    Infinite,
}

impl Level {
    pub fn value(&self) -> f64 {
        match self {
            Level::Finite(k) => *k as f64,
            Level::Infinite => f64::INFINITY,
        }
    }
}

/// `Θ = min{n ≥ 1 : c_n > 1/U}` so that `P[Θ > n] = 1/c_n`.
pub fn sample_level<R: Rng + ?Sized>(c: &CSequence, rng: &mut R) -> Level {
    let u = 1.0 - rng.random::<f64>();
    let threshold = 1.0 / u;
    if c.c(u64::MAX) <= threshold {
        return Level::Infinite;
    }
    let (mut lo, mut hi) = (1u64, u64::MAX);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if c.c(mid) > threshold {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Level::Finite(lo)
}

/// Levels `0..n` from independent per-index streams.
pub fn sample_levels(c: &CSequence, n: u64, seed: u64) -> Vec<Level> {
    map_indexed(n, |i| sample_level(c, &mut stream_rng(seed, Stream::Level, i)))
}

/// Tail of the stopped supremum at one integer level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedTailRow {
    pub n: u64,
    /// `P̂[min(sup M, Θ) > n]` with the exact continuous supremum.
    pub empirical: MCEstimate,
    /// Same with stopping at the first grid crossing.
    pub grid_empirical: f64,
    /// `(M_0/n) / c_n`, the infinite-horizon value.
    pub oracle: f64,
    /// Finite-horizon value `P[sup_{[0,T]} M > n] / c_n`.
    pub horizon_oracle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppedReport {
    pub horizon: f64,
    pub m0: f64,
    /// `E[M^σ_T]` with exact stopping at the level.
    pub stopped_mean: MCEstimate,
    /// `E[M^σ_T]` with stopping at the first grid crossing.
    pub grid_stopped_mean: MCEstimate,
    pub rows: Vec<StoppedTailRow>,
    /// `(N, Σ_{n ≤ N} p_n / c_n)` for `N = 10^2, 10^3, 10^4`.
    pub series: Vec<(u64, f64)>,
    pub series_divergent: bool,
    pub capped_paths: u64,
}

/// Largest level tabulated by [`stopped_construction_report`].
pub const REPORT_LEVELS: u64 = 20;

/// Stop each path at `σ = inf{t : M_t ≥ Θ}` and compare with the exact
/// tails of a class C₀ martingale started at `m0`.
pub fn stopped_construction_report(
    paths: &[PathSummary],
    levels: &[Level],
    c: &CSequence,
    m0: f64,
    horizon: f64,
) -> Result<StoppedReport> {
    if paths.len() != levels.len() {
        return usage(format!("{} paths but {} levels", paths.len(), levels.len()));
    }
    if paths.len() < 2 {
        return usage("stopped construction needs at least 2 paths");
    }
    let n = paths.len() as u64;
    let stopped: Vec<f64> =
        paths.iter().zip(levels).map(|(p, l)| if p.sup >= l.value() { l.value() } else { p.terminal }).collect();
    let grid_stopped: Vec<f64> =
        paths.iter().zip(levels).map(|(p, l)| p.first_node_crossing(l.value()).unwrap_or(p.terminal)).collect();
    let stopped_sup: Vec<f64> = paths.iter().zip(levels).map(|(p, l)| p.sup.min(l.value())).collect();
    let grid_sup: Vec<f64> =
        paths.iter().zip(levels).map(|(p, l)| p.first_node_crossing(l.value()).unwrap_or(p.node_sup())).collect();
    let rows = (1..=REPORT_LEVELS)
        .map(|k| {
            let level = k as f64;
            let hits = stopped_sup.iter().filter(|s| **s > level).count() as u64;
            let grid_hits = grid_sup.iter().filter(|s| **s > level).count() as u64;
            let survival = c.survival(k);
            StoppedTailRow {
                n: k,
                empirical: MCEstimate::proportion(hits, n),
                grid_empirical: grid_hits as f64 / n as f64,
                oracle: maximal_identity(m0, level) * survival,
                horizon_oracle: inverse_bessel_exceedance(1.0 / m0, level, horizon) * survival,
            }
        })
        .collect();
    let series: Vec<(u64, f64)> = [100u64, 1000, 10_000].iter().map(|&k| (k, c.stopped_series(k))).collect();
    let increments: Vec<f64> = series.windows(2).map(|w| w[1].1 - w[0].1).collect();
    Ok(StoppedReport {
        horizon,
        m0,
        stopped_mean: MCEstimate::from_samples(&stopped)?,
        grid_stopped_mean: MCEstimate::from_samples(&grid_stopped)?,
        rows,
        series_divergent: !geometric_cauchy(&increments, CAUCHY_RATIO),
        series,
        capped_paths: paths.iter().filter(|p| p.capped).count() as u64,
    })
}
