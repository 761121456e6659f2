use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::{PowerLawKernel, QuadWeights};
use crate::error::{domain, input, numeric, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::rng::{stream_rng, Stream};

/// Coefficient function `(t, y) -> value`.
pub type Coefficient = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Local Lipschitz bound `L(n, T)` valid on `|y| <= n`, `t <= T`.
pub type LipschitzBound = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Non-negative, non-decreasing drift `g(t, y)` of the pathwise equation
/// `X_t = Z_t - ∫_0^t K(t, s) g(s, X_s) ds`.
#[derive(Clone)]
pub struct DriftSpec {
    g: Coefficient,
    lipschitz: Option<LipschitzBound>,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec").field("lipschitz", &self.lipschitz.is_some()).finish()
    }
}

impl DriftSpec {
    pub fn new<F>(g: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { g: Arc::new(g), lipschitz: None }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0)
    }

    pub fn with_lipschitz<L>(mut self, bound: L) -> Self
    where
        L: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.lipschitz = Some(Arc::new(bound));
        self
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        (self.g)(t, y)
    }

    pub fn lipschitz(&self, n: f64, horizon: f64) -> Option<f64> {
        self.lipschitz.as_ref().map(|l| l(n, horizon))
    }

    /// Randomized check of non-negativity and monotonicity on
    /// `[0, T] × [-VALIDATION_BOX, VALIDATION_BOX]`.
    pub fn check(&self, horizon: f64) -> DriftCheck {
        let mut rng = stream_rng(0, Stream::Validation, 0);
        let mut out = DriftCheck { pairs: VALIDATION_PAIRS, ..DriftCheck::default() };
        for _ in 0..VALIDATION_PAIRS {
            let t = horizon * rng.random::<f64>();
            let a = VALIDATION_BOX * (2.0 * rng.random::<f64>() - 1.0);
            let b = VALIDATION_BOX * (2.0 * rng.random::<f64>() - 1.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (g_lo, g_hi) = (self.eval(t, lo), self.eval(t, hi));
            if !(g_lo.is_finite() && g_hi.is_finite()) {
                out.non_finite += 1;
                continue;
            }
            if g_lo < 0.0 || g_hi < 0.0 {
                out.negative += 1;
            }
            if g_lo > g_hi {
                out.decreasing += 1;
            }
            if hi > lo {
                out.max_slope = out.max_slope.max((g_hi - g_lo).abs() / (hi - lo));
            }
        }
        out
    }
}

const VALIDATION_PAIRS: usize = 1000;
const VALIDATION_BOX: f64 = 10.0;

/// Outcome of [`DriftSpec::check`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftCheck {
    pub pairs: usize,
    pub negative: usize,
    pub decreasing: usize,
    pub non_finite: usize,
    /// Largest difference quotient seen.
    pub max_slope: f64,
}

impl DriftCheck {
    pub fn monotone(&self) -> bool {
        self.decreasing == 0
    }
}

/// What to do with a drift that fails the sampled monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MonotonePolicy {
    #[default]
    Reject,
    /// Solve anyway; the a-priori bounds are then not guaranteed.
    SkipBounds,
}

/// How the running integral is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftRule {
    /// `X_i = Z_i - Σ_{k<i} w[i][k] g(t_k, X_k)`; explicit.
    #[default]
    LeftPoint,
    /// Right endpoint on every interval; the last term makes each node a
    /// scalar fixed-point problem.
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rule: DriftRule,
    pub policy: MonotonePolicy,
    pub max_iterations: usize,
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rule: DriftRule::LeftPoint, policy: MonotonePolicy::Reject, max_iterations: 50, rel_tol: 1e-12 }
    }
}

/// Reusable solver for `X = Z - ∫ K g(s, X_s) ds` on a fixed grid.
#[derive(Debug, Clone)]
pub struct PathwiseSolver {
    weights: QuadWeights,
    drift: DriftSpec,
    options: SolverOptions,
    check: DriftCheck,
}

impl PathwiseSolver {
    pub fn new(kernel: PowerLawKernel, grid: TimeGrid, drift: DriftSpec, options: SolverOptions) -> Result<Self> {
        Self::with_weights(QuadWeights::new(kernel, grid), drift, options)
    }

    pub fn with_weights(weights: QuadWeights, drift: DriftSpec, options: SolverOptions) -> Result<Self> {
        let horizon = weights.grid().horizon();
        let check = drift.check(horizon);
        if check.non_finite > 0 {
            return input(format!("drift is not finite at {} of {} sampled points", check.non_finite, check.pairs));
        }
        if check.negative > 0 {
            return domain(format!("drift must be non-negative; negative at {} sampled pairs", check.negative));
        }
        if !check.monotone() && options.policy == MonotonePolicy::Reject {
            return domain(format!(
                "drift must be non-decreasing in y; {} of {} sampled pairs decrease",
                check.decreasing, check.pairs
            ));
        }
        if let Some(l) = drift.lipschitz(VALIDATION_BOX, horizon) {
            if check.max_slope > l * (1.0 + 1e-9) {
                return input(format!(
                    "drift slope {} exceeds the declared Lipschitz bound {l} on |y| <= {VALIDATION_BOX}",
                    check.max_slope
                ));
            }
        }
        Ok(Self { weights, drift, options, check })
    }

    pub fn weights(&self) -> &QuadWeights {
        &self.weights
    }

    pub fn check(&self) -> &DriftCheck {
        &self.check
    }

    /// Whether the a-priori bounds are guaranteed for this drift and rule.
    pub fn bounds_hold(&self) -> bool {
        self.check.monotone()
    }

    pub fn solve(&self, z: &SamplePath) -> Result<SamplePath> {
        if z.grid() != self.weights.grid() {
            return input("input path lives on a different grid");
        }
        let mut out = Vec::new();
        self.solve_into(z.values(), &mut out)?;
        SamplePath::new(*z.grid(), out)
    }

    /// Solve into `out`, reusing its allocation.
    pub fn solve_into(&self, z: &[f64], out: &mut Vec<f64>) -> Result<()> {
        let n = self.weights.grid().n_steps();
        if z.len() != n + 1 {
            return input(format!("input has {} values for a grid of {} nodes", z.len(), n + 1));
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return input(format!("input path is not finite at node {i}"));
        }
        out.clear();
        out.reserve(n + 1);
        let grid = *self.weights.grid();
        let mut g = Vec::with_capacity(n + 1);
        match self.options.rule {
            DriftRule::LeftPoint => {
                for i in 0..=n {
                    let x = z[i] - self.weights.apply(i, &g);
                    out.push(x);
                    g.push(self.drift.eval(grid.node(i), x));
                }
            }
            DriftRule::Implicit => {
                // g[k] holds g(t_{k+1}, X_{k+1}), the right endpoint of interval k.
                out.push(z[0]);
                for i in 1..=n {
                    let t = grid.node(i);
                    let w_last = self.weights.get(i, i - 1);
                    let known = z[i] - (0..i - 1).map(|k| self.weights.get(i, k) * g[k]).sum::<f64>();
                    let mut x = known;
                    let mut converged = false;
                    for _ in 0..self.options.max_iterations {
                        let next = known - w_last * self.drift.eval(t, x);
                        let done = (next - x).abs() <= self.options.rel_tol * next.abs().max(1.0);
                        x = next;
                        if done {
                            converged = true;
                            break;
                        }
                    }
                    if !converged || !x.is_finite() {
                        return numeric(format!(
                            "fixed point did not converge at node {i} (t = {t}) within {} iterations",
                            self.options.max_iterations
                        ));
                    }
                    out.push(x);
                    g.push(self.drift.eval(t, x));
                }
            }
        }
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return numeric(format!("solution is not finite at node {i}"));
        }
        Ok(())
    }

    /// The a-priori lower bound `Z_i - Σ_k w[i][k] g(s_k, Z_{s_k})`, with `s_k`
    /// the node the rule evaluates the drift at on interval `k`.
    pub fn lower_bound(&self, z: &SamplePath) -> SamplePath {
        let grid = *z.grid();
        let shift = match self.options.rule {
            DriftRule::LeftPoint => 0,
            DriftRule::Implicit => 1,
        };
        let gz: Vec<f64> = (0..grid.n_steps().max(1))
            .map(|k| {
                let j = (k + shift).min(grid.n_steps());
                self.drift.eval(grid.node(j), z.at(j))
            })
            .collect();
        let values = (0..grid.len()).map(|i| z.at(i) - self.weights.apply(i, &gz[..i])).collect();
        SamplePath::new(grid, values).expect("lengths match")
    }
}

/// One-shot pathwise solve with default options.
pub fn solve_pathwise(z: &SamplePath, k: &PowerLawKernel, g: &DriftSpec) -> Result<SamplePath> {
    PathwiseSolver::new(*k, *z.grid(), g.clone(), SolverOptions::default())?.solve(z)
}

/// Euler scheme for `Y_t = y0 + ∫ K b(s, Y_s) ds + ∫ K σ(s, Y_s) dB_s`.
pub fn euler_svie(
    k: &PowerLawKernel,
    b: &dyn Fn(f64, f64) -> f64,
    sigma: &dyn Fn(f64, f64) -> f64,
    y0: f64,
    db: &[f64],
    grid: &TimeGrid,
) -> Result<SamplePath> {
    euler_svie_weighted(&QuadWeights::new(*k, *grid), b, sigma, y0, db)
}

/// [`euler_svie`] with precomputed weights.
pub fn euler_svie_weighted(
    weights: &QuadWeights,
    b: &dyn Fn(f64, f64) -> f64,
    sigma: &dyn Fn(f64, f64) -> f64,
    y0: f64,
    db: &[f64],
) -> Result<SamplePath> {
    let grid = *weights.grid();
    let n = grid.n_steps();
    if db.len() != n {
        return input(format!("expected {n} Brownian increments, got {}", db.len()));
    }
    let mut y = Vec::with_capacity(n + 1);
    let mut drift = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for i in 0..=n {
        let yi = y0 + weights.apply(i, &drift) + weights.apply_noise(i, &noise);
        if !yi.is_finite() {
            return numeric(format!("Euler scheme produced a non-finite value at node {i}"));
        }
        y.push(yi);
        if i < n {
            let t = grid.node(i);
            let bv = b(t, yi);
            let sv = sigma(t, yi);
            if bv.is_nan() || sv.is_nan() {
                return numeric(format!("coefficient evaluated to NaN at node {i} (t = {t}, y = {yi})"));
            }
            drift.push(bv);
            noise.push(sv * db[i]);
        }
    }
    SamplePath::new(grid, y)
}
