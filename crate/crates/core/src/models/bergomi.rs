use std::sync::Arc;

use super::driver::{GaussianDriver, RlDriverSampler};
use crate::error::{domain, input, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::kernel::{DriftSpec, PathwiseSolver, PowerLawKernel, SolverOptions};

/// Initial forward variance curve `xi0(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardVariance {
    Flat(f64),
    /// Piecewise linear through `(times[j], values[j])`, flat outside.
    Piecewise {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl ForwardVariance {
    pub fn piecewise(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return domain("forward variance curve needs matching, non-empty knots and values");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
            return domain("forward variance knots must be non-negative and increasing");
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return domain("forward variance values must be finite and non-negative");
        }
        Ok(Self::Piecewise { times, values })
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Self::Flat(v) => *v,
            Self::Piecewise { times, values } => {
                let j = times.partition_point(|&x| x <= t);
                if j == 0 {
                    values[0]
                } else if j == times.len() {
                    values[j - 1]
                } else {
                    let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
                    values[j - 1] + w * (values[j] - values[j - 1])
                }
            }
        }
    }

    /// `∫_0^T xi0(t) dt`, exact for both representations.
    pub fn integral(&self, horizon: f64) -> f64 {
        match self {
            Self::Flat(v) => v * horizon,
            Self::Piecewise { times, .. } => {
                let mut knots = vec![0.0];
                knots.extend(times.iter().copied().filter(|&t| t > 0.0 && t < horizon));
                knots.push(horizon);
                knots.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (self.at(w[0]) + self.at(w[1]))).sum()
            }
        }
    }
}

/// Rough Bergomi parameters with the correlation restricted to `rho <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughBergomiParams {
    kernel: PowerLawKernel,
    rho: f64,
    v0: f64,
    s0: f64,
    xi0: ForwardVariance,
}

impl RoughBergomiParams {
    pub fn new(alpha: f64, eta: f64, rho: f64, v0: f64, s0: f64) -> Result<Self> {
        let kernel = PowerLawKernel::new(alpha, eta)?;
        if !(rho.is_finite() && rho >= -1.0) {
            return domain(format!("rho must lie in [-1, 0], got {rho}"));
        }
        if rho > 0.0 {
            return domain(format!("rho must be ≤ 0 for rough Bergomi, got {rho}"));
        }
        if !(v0.is_finite() && v0 > 0.0) {
            return domain(format!("v0 must be > 0, got {v0}"));
        }
        if !(s0.is_finite() && s0 > 0.0) {
            return domain(format!("S0 must be > 0, got {s0}"));
        }
        Ok(Self { kernel, rho, v0, s0, xi0: ForwardVariance::Flat(v0) })
    }

    pub fn with_forward_variance(mut self, xi0: ForwardVariance) -> Self {
        self.xi0 = xi0;
        self
    }

    pub fn kernel(&self) -> &PowerLawKernel {
        &self.kernel
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha()
    }

    pub fn eta(&self) -> f64 {
        self.kernel.eta()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn forward_variance(&self) -> &ForwardVariance {
        &self.xi0
    }

    /// Link `f(t, y) = xi0(t) exp(y - eta^2/2 t^(2 alpha - 1))`.
    pub fn link(&self, t: f64, y: f64) -> f64 {
        let half_var = 0.5 * self.kernel.rl_variance(t);
        self.xi0.at(t) * (y - half_var).exp()
    }

    /// Drift of the tilted equation: `|rho| sqrt(xi0(t)) exp(y/2 - eta^2/4 t^(2 alpha - 1))`.
    pub fn tilt_drift(&self) -> DriftSpec {
        let k = self.kernel;
        let xi0 = self.xi0.clone();
        let c = self.rho.abs();
        DriftSpec::new(move |t, y| c * xi0.at(t).sqrt() * (0.5 * y - 0.25 * k.rl_variance(t)).exp())
    }
}

pub fn rbergomi_variance(p: &RoughBergomiParams, y: &SamplePath) -> SamplePath {
    let grid = *y.grid();
    let v = y.values().iter().enumerate().map(|(i, &yi)| p.link(grid.node(i), yi)).collect();
    SamplePath::new(grid, v).expect("lengths match")
}

/// Log-Euler price path driven by variance `v` and increments `dw`.
pub fn simulate_price(v: &SamplePath, dw: &[f64], s0: f64) -> Result<SamplePath> {
    let grid = *v.grid();
    let n = grid.n_steps();
    if dw.len() != n {
        return input(format!("expected {n} price increments, got {}", dw.len()));
    }
    if let Some(i) = v.values().iter().position(|x| !(*x >= 0.0)) {
        return input(format!("variance must be non-negative, got {} at node {i}", v.at(i)));
    }
    let h = grid.step();
    let mut out = Vec::with_capacity(n + 1);
    let mut log_ret = 0.0f64;
    out.push(s0);
    for i in 0..n {
        let vi = v.at(i);
        log_ret += vi.sqrt() * dw[i] - 0.5 * vi * h;
        out.push(s0 * log_ret.exp());
    }
    SamplePath::new(grid, out)
}

/// Solve the tilted equation `Ỹ = Y - ∫ K |rho| sqrt(ṽ) ds` pathwise.
pub fn simulate_tilde_y(p: &RoughBergomiParams, driver: &GaussianDriver) -> Result<SamplePath> {
    if p.rho() > 0.0 {
        return domain(format!("rho must be ≤ 0, got {}", p.rho()));
    }
    let solver = PathwiseSolver::new(*p.kernel(), driver.grid, p.tilt_drift(), SolverOptions::default())?;
    solver.solve(&driver.y)
}

/// Everything simulated for one rough Bergomi path.
#[derive(Debug, Clone, PartialEq)]
pub struct BergomiPath {
    pub driver: GaussianDriver,
    pub v: SamplePath,
    pub dw: Vec<f64>,
    pub s: SamplePath,
    pub tilde_y: SamplePath,
    pub tilde_v: SamplePath,
}

/// Cached sampler and solver for repeated rough Bergomi paths on one grid.
#[derive(Debug, Clone)]
pub struct BergomiSimulator {
    params: RoughBergomiParams,
    sampler: Arc<RlDriverSampler>,
    solver: PathwiseSolver,
}

impl BergomiSimulator {
    pub fn new(params: RoughBergomiParams, grid: TimeGrid) -> Result<Self> {
        let sampler = Arc::new(RlDriverSampler::new(*params.kernel(), grid)?);
        Self::with_sampler(params, sampler)
    }

    /// Reuse an existing driver factorization (same kernel and grid).
    pub fn with_sampler(params: RoughBergomiParams, sampler: Arc<RlDriverSampler>) -> Result<Self> {
        if sampler.kernel() != params.kernel() {
            return domain("driver sampler was built for a different kernel");
        }
        let solver =
            PathwiseSolver::with_weights(sampler.weights().clone(), params.tilt_drift(), SolverOptions::default())?;
        Ok(Self { params, sampler, solver })
    }

    pub fn params(&self) -> &RoughBergomiParams {
        &self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        self.sampler.grid()
    }

    pub fn sampler(&self) -> &Arc<RlDriverSampler> {
        &self.sampler
    }

    pub fn path(&self, seed: u64, index: u64) -> Result<BergomiPath> {
        let driver = self.sampler.sample(seed, index);
        self.complete(driver)
    }

    /// Price path only, skipping the tilted equation.
    pub fn price_path(&self, seed: u64, index: u64) -> Result<(GaussianDriver, SamplePath)> {
        let driver = self.sampler.sample(seed, index);
        let v = rbergomi_variance(&self.params, &driver.y);
        let dw = driver.price_increments(self.params.rho());
        let s = simulate_price(&v, &dw, self.params.s0())?;
        Ok((driver, s))
    }

    pub fn tilde_y(&self, driver: &GaussianDriver) -> Result<SamplePath> {
        self.solver.solve(&driver.y)
    }

    fn complete(&self, driver: GaussianDriver) -> Result<BergomiPath> {
        let v = rbergomi_variance(&self.params, &driver.y);
        let dw = driver.price_increments(self.params.rho());
        let s = simulate_price(&v, &dw, self.params.s0())?;
        let tilde_y = self.solver.solve(&driver.y)?;
        let tilde_v = rbergomi_variance(&self.params, &tilde_y);
        Ok(BergomiPath { driver, v, dw, s, tilde_y, tilde_v })
    }
}
