//! Power-law Volterra kernels, exact grid weights and regularity diagnostics.

mod solver;

pub use solver::{
    euler_svie, euler_svie_weighted, solve_pathwise, Coefficient, DriftCheck, DriftRule, DriftSpec, LipschitzBound,
    MonotonePolicy, PathwiseSolver, SolverOptions,
};

use crate::error::{domain, usage, Result};
use crate::grid::TimeGrid;
use crate::stats::{neumaier_sum, ols_slope};

/// `K(t, s) = eta * sqrt(2 alpha - 1) * (t - s)^(alpha - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawKernel {
    alpha: f64,
    eta: f64,
}

impl PowerLawKernel {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.5) {
            return domain(format!("alpha must be > 1/2, got {alpha}"));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return domain(format!("eta must be > 0, got {eta}"));
        }
        Ok(Self { alpha, eta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The prefactor `eta * sqrt(2 alpha - 1)`.
    pub fn scale(&self) -> f64 {
        self.eta * (2.0 * self.alpha - 1.0).sqrt()
    }

    /// Exponent `2 alpha - 1` of the variance `eta^2 t^(2 alpha - 1)`.
    pub fn hurst2(&self) -> f64 {
        2.0 * self.alpha - 1.0
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if !(s >= 0.0 && s < t) {
            return domain(format!("kernel needs 0 <= s < t, got t={t}, s={s}"));
        }
        Ok(self.scale() * (t - s).powf(self.alpha - 1.0))
    }

    /// `∫_0^t K(t, s) ds`.
    pub fn l1_norm(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("time must be >= 0, got {t}"));
        }
        Ok(self.scale() * t.powf(self.alpha) / self.alpha)
    }

    /// `∫_a^b K(t, s) ds` for `0 <= a <= b <= t`, by the antiderivative.
    pub fn integral(&self, t: f64, a: f64, b: f64) -> f64 {
        self.scale() / self.alpha * ((t - a).powf(self.alpha) - (t - b).powf(self.alpha))
    }

    /// `∫_a^b K(t, s)^2 ds` for `0 <= a <= b <= t`.
    pub fn integral_sq(&self, t: f64, a: f64, b: f64) -> f64 {
        let p = self.hurst2();
        self.eta * self.eta * ((t - a).powf(p) - (t - b).powf(p))
    }

    /// Variance `eta^2 t^(2 alpha - 1)` of the Riemann–Liouville process at `t`.
    pub fn rl_variance(&self, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            self.eta * self.eta * t.powf(self.hurst2())
        }
    }
}

pub fn kernel_eval(k: &PowerLawKernel, t: f64, s: f64) -> Result<f64> {
    k.eval(t, s)
}

pub fn kernel_l1(k: &PowerLawKernel, t: f64) -> Result<f64> {
    k.l1_norm(t)
}

/// Exact per-interval kernel weights on a uniform grid.
///
/// On a uniform grid the weights depend on `i - k` only, so one row of
/// length `n` is stored: `drift[m - 1] = ∫_{t_k}^{t_{k+1}} K(t_i, s) ds`
/// with `m = i - k`. The stochastic weights are the matching effective
/// kernel values `sqrt(∫ K(t_i, s)^2 ds / h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadWeights {
    kernel: PowerLawKernel,
    grid: TimeGrid,
    drift: Vec<f64>,
    drift_rev: Vec<f64>,
    noise_rev: Vec<f64>,
}

impl QuadWeights {
    pub fn new(kernel: PowerLawKernel, grid: TimeGrid) -> Self {
        let n = grid.n_steps();
        let h = grid.step();
        let a = kernel.alpha();
        let p = kernel.hurst2();
        let drift_scale = kernel.scale() * h.powf(a) / a;
        let noise_scale = kernel.eta() * h.powf(a - 1.0);
        let mut drift = Vec::with_capacity(n);
        let mut noise = Vec::with_capacity(n);
        let mut prev = 0.0f64;
        let mut prev_sq = 0.0f64;
        for m in 1..=n {
            let mf = m as f64;
            let cur = mf.powf(a);
            let cur_sq = mf.powf(p);
            drift.push(drift_scale * (cur - prev));
            noise.push(noise_scale * (cur_sq - prev_sq).sqrt());
            prev = cur;
            prev_sq = cur_sq;
        }
        let drift_rev = drift.iter().rev().copied().collect();
        let noise_rev = noise.iter().rev().copied().collect();
        Self { kernel, grid, drift, drift_rev, noise_rev }
    }

    pub fn kernel(&self) -> &PowerLawKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn is_empty(&self) -> bool {
        self.drift.is_empty()
    }

    /// `w[i][k]`; zero unless `k < i`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        if k < i {
            self.drift[i - k - 1]
        } else {
            0.0
        }
    }

    /// Effective stochastic weight for interval `k` seen from node `i`.
    pub fn noise(&self, i: usize, k: usize) -> f64 {
        if k < i {
            self.noise_rev[self.noise_rev.len() - (i - k)]
        } else {
            0.0
        }
    }

    /// Row `i` as a dense vector of length `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..i).map(|k| self.get(i, k)).collect()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        neumaier_sum(self.drift[..i].iter().copied())
    }

    /// `Σ_{k<i} w[i][k] * values[k]`.
    pub fn apply(&self, i: usize, values: &[f64]) -> f64 {
        let n = self.drift_rev.len();
        dot(&self.drift_rev[n - i..], &values[..i])
    }

    /// `Σ_{k<i} noise(i, k) * values[k]`.
    pub fn apply_noise(&self, i: usize, values: &[f64]) -> f64 {
        let n = self.noise_rev.len();
        dot(&self.noise_rev[n - i..], &values[..i])
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let j = 4 * c;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn quad_weights(k: &PowerLawKernel, grid: &TimeGrid) -> QuadWeights {
    QuadWeights::new(*k, *grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityRow {
    pub eps: f64,
    /// `sup_t ∫_t^{t+ε} K(t+ε, s) ds`, scanned over `t ∈ [0, T]`.
    pub sup_local_mass: f64,
    /// Closed form `eta sqrt(2 alpha - 1) ε^alpha / alpha`.
    pub closed_form: f64,
    /// `∫_0^ε K(ε, s)^2 ds = eta^2 ε^(2 alpha - 1)`.
    pub local_l2_mass: f64,
    /// `∫_0^T |K(t+ε, ·) - K(t, ·)|` shift distance, integrated over the lag.
    pub shift_l1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub rows: Vec<ContinuityRow>,
    /// Log-log slope of the local mass against ε.
    pub gamma_hat: Option<f64>,
    pub l2_gamma_hat: Option<f64>,
    pub shift_gamma_hat: Option<f64>,
}

const CONTINUITY_SCAN: usize = 256;

pub fn continuity_report(k: &PowerLawKernel, horizon: f64, eps_list: &[f64]) -> Result<ContinuityReport> {
    if eps_list.is_empty() {
        return usage("eps list is empty");
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return domain("eps values must be strictly positive");
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return usage("eps list must be strictly decreasing");
    }
    let a = k.alpha();
    let c = k.scale() / a;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let sup = (0..=CONTINUITY_SCAN)
            .map(|j| {
                let t = horizon * j as f64 / CONTINUITY_SCAN as f64;
                k.integral(t + eps, t, t + eps)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = (c * (horizon.powf(a) + eps.powf(a) - (horizon + eps).powf(a))).abs();
        rows.push(ContinuityRow {
            eps,
            sup_local_mass: sup,
            closed_form: c * eps.powf(a),
            local_l2_mass: k.integral_sq(eps, 0.0, eps),
            shift_l1: shift,
        });
    }
    let le: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let fit = |f: fn(&ContinuityRow) -> f64| -> Option<f64> {
        if rows.iter().any(|r| f(r) <= 0.0) {
            return None;
        }
        let ly: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        ols_slope(&le, &ly)
    };
    Ok(ContinuityReport {
        gamma_hat: fit(|r| r.sup_local_mass),
        l2_gamma_hat: fit(|r| r.local_l2_mass),
        shift_gamma_hat: fit(|r| r.shift_l1),
        rows,
    })
}
