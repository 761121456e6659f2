use crate::error::{input, usage, Result};
use crate::stats::{geometric_cauchy, neumaier_sum, CAUCHY_RATIO};

/// Partial sums `s_N = Σ_{n ≤ N} P̂[sup > n]` along a ladder of `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSumReport {
    pub ladder: Vec<u64>,
    pub partial_sums: Vec<f64>,
    /// Standard error of each partial sum.
    pub stderr: Vec<f64>,
    /// `s_{N_{k+1}} - s_{N_k}`
    pub increments: Vec<f64>,
    pub divergent: bool,
}

/// `1, 2, 4, ..., 2^k`.
pub fn dyadic_ladder(k: u32) -> Vec<u64> {
    (0..=k).map(|j| 1u64 << j).collect()
}

/// Tail sums of supremum samples.
///
/// Each sample contributes `#{1 ≤ n ≤ N : x > n}`, so the partial sums are
/// per-sample averages and carry ordinary standard errors. The divergence
/// flag is raised when the increments along the ladder fail the geometric
/// Cauchy test. The ladder should stay within the range the samples resolve.
pub fn tail_sums(samples: &[f64], ladder: &[u64]) -> Result<TailSumReport> {
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return input(format!("tail sums need finite samples, got {x}"));
    }
    if samples.len() < 2 {
        return usage("tail sums need at least 2 samples");
    }
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return usage("tail-sum ladder must be non-empty and strictly increasing");
    }
    let n = samples.len() as f64;
    let counts = |cap: u64| samples.iter().map(move |&x| if x <= 1.0 { 0.0 } else { (x.ceil() - 1.0).min(cap as f64) });
    let mut partial_sums = Vec::with_capacity(ladder.len());
    let mut stderr = Vec::with_capacity(ladder.len());
    for &cap in ladder {
        let mean = neumaier_sum(counts(cap)) / n;
        let ss = neumaier_sum(counts(cap).map(|c| (c - mean) * (c - mean)));
        partial_sums.push(mean);
        stderr.push((ss / (n - 1.0) / n).sqrt());
    }
    let increments: Vec<f64> = partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
    let divergent = !geometric_cauchy(&increments, CAUCHY_RATIO);
    Ok(TailSumReport { ladder: ladder.to_vec(), partial_sums, stderr, increments, divergent })
}
