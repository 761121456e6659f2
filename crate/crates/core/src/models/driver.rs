use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, numeric, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::kernel::{dot, PowerLawKernel, QuadWeights};
use crate::quadrature::{integrate, Tolerance};
use crate::rng::{stream_rng, Stream};

/// Largest diagonal jitter tried when the stacked covariance is not
/// numerically positive definite.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// `Cov(Y_t, Y_u)` of the Riemann–Liouville process `Y_t = ∫_0^t K(t, s) dB_s`.
pub fn rl_covariance(k: &PowerLawKernel, t: f64, u: f64) -> Result<f64> {
    if !(t >= 0.0 && u >= 0.0) {
        return domain(format!("covariance needs non-negative times, got t={t}, u={u}"));
    }
    if t == 0.0 || u == 0.0 {
        return Ok(0.0);
    }
    if t == u {
        return Ok(k.rl_variance(t));
    }
    let (lo, hi) = if t < u { (t, u) } else { (u, t) };
    let gap = hi - lo;
    let a = k.alpha();
    // x = lo - s, then y = x^alpha removes the endpoint singularity.
    let inv = 1.0 / a;
    let f = |y: f64| (y.powf(inv) + gap).powf(a - 1.0);
    let top = lo.powf(a);
    let knee = gap.powf(a).min(top);
    let integral =
        integrate(f, 0.0, knee, Tolerance::relative(1e-12))? + integrate(f, knee, top, Tolerance::relative(1e-12))?;
    Ok(k.eta() * k.eta() * (2.0 * a - 1.0) * integral / a)
}

/// One joint draw of the Riemann–Liouville path and its Brownian drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDriver {
    pub grid: TimeGrid,
    /// Riemann–Liouville values at the nodes, `Y_0 = 0`.
    pub y: SamplePath,
    /// Increments `B_{t_{j+1}} - B_{t_j}` of the Brownian motion driving `Y`.
    pub db: Vec<f64>,
    /// Increments of an independent Brownian motion.
    pub dw_perp: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl GaussianDriver {
    /// Price-noise increments `rho dB + sqrt(1 - rho^2) dW_perp`.
    pub fn price_increments(&self, rho: f64) -> Vec<f64> {
        let bar = (1.0 - rho * rho).max(0.0).sqrt();
        self.db.iter().zip(&self.dw_perp).map(|(b, w)| rho * b + bar * w).collect()
    }
}

/// Exact sampler for `(dB_1, ..., dB_n, Y_{t_1}, ..., Y_{t_n})`.
///
/// The stacked covariance is factorized once. Row `i` of the factor for
/// `Y_{t_i}` only touches the first `i` Brownian columns and the first `i`
/// residual columns, so both parts are stored packed.
#[derive(Debug, Clone)]
pub struct RlDriverSampler {
    kernel: PowerLawKernel,
    grid: TimeGrid,
    weights: QuadWeights,
    brownian_diag: Vec<f64>,
    brownian_part: Vec<f64>,
    residual_part: Vec<f64>,
    jitter: f64,
}

fn packed_offset(i: usize) -> usize {
    i * (i - 1) / 2
}

impl RlDriverSampler {
    pub fn new(kernel: PowerLawKernel, grid: TimeGrid) -> Result<Self> {
        let weights = QuadWeights::new(kernel, grid);
        let n = grid.n_steps();
        if n == 0 {
            return Ok(Self {
                kernel,
                grid,
                weights,
                brownian_diag: vec![],
                brownian_part: vec![],
                residual_part: vec![],
                jitter: 0.0,
            });
        }
        let h = grid.step();
        let dim = 2 * n;
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for j in 0..n {
            cov[(j, j)] = h;
        }
        for i in 1..=n {
            let r = n + i - 1;
            for j in 1..=i {
                // Cov(Y_{t_i}, B_{t_j} - B_{t_{j-1}}) = w[i][j-1].
                let c = weights.get(i, j - 1);
                cov[(r, j - 1)] = c;
                cov[(j - 1, r)] = c;
            }
            let ti = grid.node(i);
            for m in 1..=i {
                let c = rl_covariance(&kernel, ti, grid.node(m))?;
                let q = n + m - 1;
                cov[(r, q)] = c;
                cov[(q, r)] = c;
            }
        }
        let (factor, jitter) = match Cholesky::new(cov.clone()) {
            Some(c) => (c, 0.0),
            None => {
                let mut bumped = cov.clone();
                for d in 0..dim {
                    bumped[(d, d)] += CHOLESKY_JITTER;
                }
                match Cholesky::new(bumped) {
                    Some(c) => (c, CHOLESKY_JITTER),
                    None => {
                        let smallest = SymmetricEigen::new(cov).eigenvalues.min();
                        return numeric(format!(
                            "driver covariance is not positive definite after jitter {CHOLESKY_JITTER}; smallest eigenvalue {smallest:e}"
                        ));
                    }
                }
            }
        };
        let l = factor.l();
        let brownian_diag = (0..n).map(|j| l[(j, j)]).collect();
        let mut brownian_part = Vec::with_capacity(n * (n + 1) / 2);
        let mut residual_part = Vec::with_capacity(n * (n + 1) / 2);
        for i in 1..=n {
            let r = n + i - 1;
            for j in 0..i {
                brownian_part.push(l[(r, j)]);
            }
            for j in 0..i {
                residual_part.push(l[(r, n + j)]);
            }
        }
        Ok(Self { kernel, grid, weights, brownian_diag, brownian_part, residual_part, jitter })
    }

    pub fn kernel(&self) -> &PowerLawKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn weights(&self) -> &QuadWeights {
        &self.weights
    }

    /// Diagonal jitter that was needed for the factorization (0 or 1e-12).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample(&self, seed: u64, index: u64) -> GaussianDriver {
        let n = self.grid.n_steps();
        let mut rng = stream_rng(seed, Stream::Driver, index);
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let sqrt_h = self.grid.step().sqrt();
        let dw_perp = (0..n).map(|_| sqrt_h * rng.sample::<f64, _>(StandardNormal)).collect();
        let db = z.iter().zip(&self.brownian_diag).map(|(zj, d)| d * zj).collect();
        let mut y = Vec::with_capacity(n + 1);
        y.push(0.0);
        for i in 1..=n {
            let off = packed_offset(i);
            let v = dot(&self.brownian_part[off..off + i], &z[..i]) + dot(&self.residual_part[off..off + i], &e[..i]);
            y.push(v);
        }
        GaussianDriver {
            grid: self.grid,
            y: SamplePath::new(self.grid, y).expect("lengths match"),
            db,
            dw_perp,
            seed,
            index,
        }
    }

    /// Lazily generated drivers `0..n_paths`.
    pub fn stream(self: &Arc<Self>, n_paths: u64, seed: u64) -> DriverStream {
        DriverStream { sampler: Arc::clone(self), seed, next: 0, end: n_paths }
    }
}

/// Iterator over seeded drivers.
#[derive(Debug, Clone)]
pub struct DriverStream {
    sampler: Arc<RlDriverSampler>,
    seed: u64,
    next: u64,
    end: u64,
}

impl Iterator for DriverStream {
    type Item = GaussianDriver;

    fn next(&mut self) -> Option<GaussianDriver> {
        if self.next >= self.end {
            return None;
        }
        let d = self.sampler.sample(self.seed, self.next);
        self.next += 1;
        Some(d)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for DriverStream {}

/// Build the sampler for `(k, grid)` and stream `n_paths` drivers.
pub fn sample_driver(k: &PowerLawKernel, grid: &TimeGrid, n_paths: u64, seed: u64) -> Result<DriverStream> {
    let sampler = Arc::new(RlDriverSampler::new(*k, *grid)?);
    Ok(sampler.stream(n_paths, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn covariance_examples() {
        let bm = PowerLawKernel::new(1.0, 1.0).unwrap();
        assert_relative_eq!(rl_covariance(&bm, 2.0, 3.0).unwrap(), 2.0, max_relative = 1e-12);
        let k = PowerLawKernel::new(0.7, 1.5).unwrap();
        assert_relative_eq!(rl_covariance(&k, 1.0, 1.0).unwrap(), 2.25, max_relative = 1e-15);
        assert_eq!(rl_covariance(&k, 0.0, 0.4).unwrap(), 0.0);
        assert!(rl_covariance(&k, -1.0, 0.4).is_err());
    }

    #[test]
    fn covariance_matches_high_precision_values() {
        let k = PowerLawKernel::new(0.7, 1.5).unwrap();
        let cases = [
            (1.0, 1.0 + 1e-9, 2.249_634_803_225_34),
            (0.25, 1.0, 0.511_764_986_620_876),
            (0.5, 0.507_812_5, 1.501_731_512_056_194),
        ];
        for (t, u, want) in cases {
            assert_relative_eq!(rl_covariance(&k, t, u).unwrap(), want, max_relative = 1e-10);
            assert_relative_eq!(rl_covariance(&k, u, t).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn determinism() {
        let k = PowerLawKernel::new(0.7, 1.5).unwrap();
        let g = TimeGrid::new(1.0, 16).unwrap();
        let a: Vec<_> = sample_driver(&k, &g, 3, 11).unwrap().collect();
        let b: Vec<_> = sample_driver(&k, &g, 3, 11).unwrap().collect();
        assert_eq!(a, b);
        assert_ne!(a[0].y, a[1].y);
    }

    #[test]
    fn brownian_kernel_gives_cumulative_sums() {
        let bm = PowerLawKernel::new(1.0, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 8).unwrap();
        let s = RlDriverSampler::new(bm, g).unwrap();
        let d = s.sample(3, 0);
        let mut acc = 0.0;
        for i in 1..=8 {
            acc += d.db[i - 1];
            assert!((d.y.at(i) - acc).abs() < 1e-5, "{} vs {acc}", d.y.at(i));
        }
    }
}
