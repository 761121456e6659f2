use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::bergomi::simulate_price;
use crate::error::{domain, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::kernel::{euler_svie_weighted, Coefficient, PowerLawKernel, QuadWeights};
use crate::rng::{stream_rng, Stream};

/// Stochastic-volatility model driven by a Volterra equation:
/// `Y = y0 + ∫ K b ds + ∫ K σ dB`, `v = f(t, Y)`, `dS = S sqrt(v) dW`
/// with `W = rho B + sqrt(1 - rho^2) W_perp`.
#[derive(Clone)]
pub struct GenericSVSpec {
    kernel: PowerLawKernel,
    f: Coefficient,
    b: Coefficient,
    sigma: Coefficient,
    y0: f64,
    rho: f64,
    s0: f64,
}

impl fmt::Debug for GenericSVSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericSVSpec")
            .field("kernel", &self.kernel)
            .field("y0", &self.y0)
            .field("rho", &self.rho)
            .field("s0", &self.s0)
            .finish_non_exhaustive()
    }
}

impl GenericSVSpec {
    pub fn new(
        kernel: PowerLawKernel,
        f: Coefficient,
        b: Coefficient,
        sigma: Coefficient,
        y0: f64,
        rho: f64,
        s0: f64,
    ) -> Result<Self> {
        if !(rho.is_finite() && (-1.0..=1.0).contains(&rho)) {
            return domain(format!("rho must lie in [-1, 1], got {rho}"));
        }
        if !(s0.is_finite() && s0 > 0.0) {
            return domain(format!("S0 must be > 0, got {s0}"));
        }
        if !y0.is_finite() {
            return domain(format!("y0 must be finite, got {y0}"));
        }
        let f0 = f(0.0, y0);
        if !(f0 > 0.0 && f0.is_finite()) {
            return domain(format!("link must be positive at (0, y0), got {f0}"));
        }
        Ok(Self { kernel, f, b, sigma, y0, rho, s0 })
    }

    pub fn kernel(&self) -> &PowerLawKernel {
        &self.kernel
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn link(&self, t: f64, y: f64) -> f64 {
        (self.f)(t, y)
    }

    /// Drift of the tilted process: `b + rho sqrt(f) σ`.
    pub fn tilted_drift(&self) -> Coefficient {
        let (f, b, sigma, rho) = (self.f.clone(), self.b.clone(), self.sigma.clone(), self.rho);
        Arc::new(move |t, y| b(t, y) + rho * f(t, y).max(0.0).sqrt() * sigma(t, y))
    }
}

/// One path of a generic model together with its tilted counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericPath {
    pub y: SamplePath,
    pub v: SamplePath,
    pub db: Vec<f64>,
    pub dw: Vec<f64>,
    pub s: SamplePath,
    pub tilde_y: SamplePath,
    pub tilde_v: SamplePath,
}

#[derive(Clone)]
pub struct GenericSimulator {
    spec: GenericSVSpec,
    weights: QuadWeights,
    tilted: Coefficient,
}

impl fmt::Debug for GenericSimulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericSimulator").field("spec", &self.spec).field("grid", self.weights.grid()).finish()
    }
}

/// Brownian increments for path `index` of an Euler-scheme model.
pub(crate) fn euler_increments(grid: &TimeGrid, seed: u64, index: u64) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n_steps();
    let sqrt_h = grid.step().sqrt();
    let mut rng = stream_rng(seed, Stream::Euler, index);
    let db = (0..n).map(|_| sqrt_h * rng.sample::<f64, _>(StandardNormal)).collect();
    let dw_perp = (0..n).map(|_| sqrt_h * rng.sample::<f64, _>(StandardNormal)).collect();
    (db, dw_perp)
}

impl GenericSimulator {
    pub fn new(spec: GenericSVSpec, grid: TimeGrid) -> Self {
        let weights = QuadWeights::new(spec.kernel, grid);
        let tilted = spec.tilted_drift();
        Self { spec, weights, tilted }
    }

    pub fn spec(&self) -> &GenericSVSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        self.weights.grid()
    }

    pub fn path(&self, seed: u64, index: u64) -> Result<GenericPath> {
        let grid = *self.weights.grid();
        let (db, dw_perp) = euler_increments(&grid, seed, index);
        let spec = &self.spec;
        let y = euler_svie_weighted(&self.weights, &*spec.b, &*spec.sigma, spec.y0, &db)?;
        let tilde_y = euler_svie_weighted(&self.weights, &*self.tilted, &*spec.sigma, spec.y0, &db)?;
        let link = |p: &SamplePath| {
            let v = p.values().iter().enumerate().map(|(i, &x)| (spec.f)(grid.node(i), x)).collect();
            SamplePath::new(grid, v).expect("lengths match")
        };
        let v = link(&y);
        let tilde_v = link(&tilde_y);
        let bar = (1.0 - spec.rho * spec.rho).max(0.0).sqrt();
        let dw: Vec<f64> = db.iter().zip(&dw_perp).map(|(b, w)| spec.rho * b + bar * w).collect();
        let s = simulate_price(&v, &dw, spec.s0)?;
        Ok(GenericPath { y, v, db, dw, s, tilde_y, tilde_v })
    }
}

/// Affine Volterra parameters `a(y) = a1 y`, `b(y) = b0 + b1 y` (with `a0 = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineVolterraParams {
    kernel: PowerLawKernel,
    a1: f64,
    b0: f64,
    b1: f64,
    y0: f64,
}

impl AffineVolterraParams {
    pub fn new(kernel: PowerLawKernel, a1: f64, b0: f64, b1: f64, y0: f64) -> Result<Self> {
        if !(kernel.alpha() < 1.0) {
            return domain(format!("affine Volterra kernel needs alpha in (1/2, 1), got {}", kernel.alpha()));
        }
        if !(a1.is_finite() && a1 >= 0.0) {
            return domain(format!("a1 must be >= 0, got {a1}"));
        }
        if !(b0.is_finite() && b0 >= 0.0) {
            return domain(format!("b0 must be >= 0, got {b0}"));
        }
        if !b1.is_finite() {
            return domain(format!("b1 must be finite, got {b1}"));
        }
        if !(y0.is_finite() && y0 >= 0.0) {
            return domain(format!("Y0 must be >= 0, got {y0}"));
        }
        Ok(Self { kernel, a1, b0, b1, y0 })
    }

    pub fn kernel(&self) -> &PowerLawKernel {
        &self.kernel
    }

    pub fn a0(&self) -> f64 {
        0.0
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    fn drift(&self) -> Coefficient {
        let (b0, b1) = (self.b0, self.b1);
        Arc::new(move |_, y| b0 + b1 * y)
    }

    fn diffusion(&self) -> Coefficient {
        let a1 = self.a1;
        Arc::new(move |_, y: f64| (a1 * y.max(0.0)).sqrt())
    }

    /// Rough-Heston type model with variance `v = max(Y, 0)`.
    pub fn sv_spec(&self, rho: f64, s0: f64) -> Result<GenericSVSpec> {
        GenericSVSpec::new(
            self.kernel,
            Arc::new(|_, y: f64| y.max(0.0)),
            self.drift(),
            self.diffusion(),
            self.y0,
            rho,
            s0,
        )
    }
}

/// Solution of the deterministic linear equation `m = Y0 + ∫ K (b0 + b1 m) ds`
/// with the same left-point weights as the Euler scheme.
pub fn affine_mean_curve(p: &AffineVolterraParams, grid: &TimeGrid) -> SamplePath {
    affine_linear_curve(p.kernel, p.b0, p.b1, p.y0, grid)
}

pub(crate) fn affine_linear_curve(k: PowerLawKernel, b0: f64, b1: f64, y0: f64, grid: &TimeGrid) -> SamplePath {
    let w = QuadWeights::new(k, *grid);
    let mut m = Vec::with_capacity(grid.len());
    let mut drift = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let mi = y0 + w.apply(i, &drift);
        m.push(mi);
        drift.push(b0 + b1 * mi);
    }
    SamplePath::new(*grid, m).expect("lengths match")
}

/// Stream of affine Volterra paths `Y` (the variance is `max(Y, 0)`).
#[derive(Debug, Clone)]
pub struct AffinePaths {
    weights: QuadWeights,
    params: AffineVolterraParams,
    seed: u64,
    next: u64,
    end: u64,
}

impl AffinePaths {
    pub fn path(&self, index: u64) -> Result<SamplePath> {
        let (db, _) = euler_increments(self.weights.grid(), self.seed, index);
        let b = self.params.drift();
        let s = self.params.diffusion();
        euler_svie_weighted(&self.weights, &*b, &*s, self.params.y0, &db)
    }
}

impl Iterator for AffinePaths {
    type Item = Result<SamplePath>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let out = self.path(self.next);
        self.next += 1;
        Some(out)
    }
}

pub fn simulate_affine(p: &AffineVolterraParams, grid: &TimeGrid, n_paths: u64, seed: u64) -> AffinePaths {
    AffinePaths { weights: QuadWeights::new(p.kernel, *grid), params: *p, seed, next: 0, end: n_paths }
}
