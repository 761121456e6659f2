use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::rng::{stream_rng, Stream};
use crate::stats::{erf, erfc};

/// Values of `M` above this are capped and the path is flagged.
pub const M_CAP: f64 = 1e12;

/// `E[M_t] = erf(r / sqrt(2t)) / r` for `M = 1/‖x + B‖`, `‖x‖ = r`.
pub fn inverse_bessel_mean(start_radius: f64, t: f64) -> f64 {
    erf(start_radius / (2.0 * t).sqrt()) / start_radius
}

/// `P[sup_{s ≤ t} M_s > level]`: the chance that three-dimensional Brownian
/// motion from distance `r` enters the ball of radius `1/level` by time `t`.
pub fn inverse_bessel_exceedance(start_radius: f64, level: f64, t: f64) -> f64 {
    let inner = 1.0 / level;
    if inner >= start_radius {
        return 1.0;
    }
    inner / start_radius * erfc((start_radius - inner) / (2.0 * t).sqrt())
}

/// `P[sup_{s ≥ 0} M_s > level] = min(1, M_0 / level)`.
pub fn maximal_identity(m0: f64, level: f64) -> f64 {
    (m0 / level).min(1.0)
}

/// One inverse Bessel(3) path with exact suprema between the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselPath {
    /// `M` at the nodes.
    pub m: SamplePath,
    /// Supremum of `M` over `[t_i, t_{i+1}]`.
    pub interval_sup: Vec<f64>,
    pub capped: bool,
}

impl BesselPath {
    /// Supremum over the whole horizon.
    pub fn sup(&self) -> f64 {
        self.sup_until(self.interval_sup.len())
    }

    /// Supremum over `[0, t_i]`.
    pub fn sup_until(&self, i: usize) -> f64 {
        self.interval_sup[..i].iter().copied().fold(self.m.at(0), f64::max)
    }

    pub fn summary(&self) -> PathSummary {
        let mut records = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for &v in self.m.values() {
            if v > best {
                best = v;
                records.push(v);
            }
        }
        PathSummary { sup: self.sup(), terminal: self.m.terminal(), records, capped: self.capped }
    }
}

/// What the stopping construction needs from a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    /// Continuous-time supremum.
    pub sup: f64,
    pub terminal: f64,
    /// Successive running maxima of the node values, starting at `M_0`.
    pub records: Vec<f64>,
    pub capped: bool,
}

impl PathSummary {
    /// Largest node value.
    pub fn node_sup(&self) -> f64 {
        *self.records.last().expect("records start at M_0")
    }

    /// Value at the first node where `M ≥ level`, if any.
    pub fn first_node_crossing(&self, level: f64) -> Option<f64> {
        self.records.iter().copied().find(|&r| r >= level)
    }
}

/// Minimum of a Bessel(3) bridge from `a` to `b` over time `h`, by inversion
/// of `P[min > m] = (φ(b-a) - φ(a+b-2m)) / (φ(b-a) - φ(a+b))`.
fn bridge_minimum(a: f64, b: f64, h: f64, u: f64) -> f64 {
    let q = -(-2.0 * a * b / h).exp_m1();
    let log_term = (-u * q).ln_1p();
    let d = ((b - a) * (b - a) - 2.0 * h * log_term).max(0.0);
    let m = (4.0 * a * b + 2.0 * h * log_term) / (2.0 * (a + b + d.sqrt()));
    if m.is_nan() {
        return 0.0;
    }
    m.clamp(0.0, a.min(b))
}

fn capped_inverse(r: f64, flag: &mut bool) -> f64 {
    if r * M_CAP <= 1.0 {
        *flag = true;
        M_CAP
    } else {
        1.0 / r
    }
}

/// Path `index` of `M = 1/‖x + B‖` on `grid`.
///
/// The radius moves by exact Bessel(3) transitions built from three Gaussian
/// coordinates, and the bridge minimum on every step gives the exact
/// supremum of `M` in between.
pub fn inverse_bessel_path(grid: &TimeGrid, start_radius: f64, seed: u64, index: u64) -> Result<BesselPath> {
    if !(start_radius > 0.0 && start_radius.is_finite()) {
        return domain(format!("start radius must be > 0, got {start_radius}"));
    }
    let n = grid.n_steps();
    let h = grid.step();
    let sqrt_h = h.sqrt();
    let mut rng = stream_rng(seed, Stream::Bessel, index);
    let mut capped = false;
    let mut r = start_radius;
    let mut m = Vec::with_capacity(n + 1);
    let mut interval_sup = Vec::with_capacity(n);
    m.push(capped_inverse(r, &mut capped));
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let z3: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let x = r + sqrt_h * z1;
        let next = (x * x + h * (z2 * z2 + z3 * z3)).sqrt();
        let low = bridge_minimum(r, next, h, u);
        interval_sup.push(capped_inverse(low, &mut capped));
        m.push(capped_inverse(next, &mut capped));
        r = next;
    }
    Ok(BesselPath { m: SamplePath::new(*grid, m)?, interval_sup, capped })
}

/// Stream of [`BesselPath`]s `0..n_paths`.
#[derive(Debug, Clone)]
pub struct BesselPaths {
    grid: TimeGrid,
    start_radius: f64,
    seed: u64,
    next: u64,
    end: u64,
}

impl Iterator for BesselPaths {
    type Item = BesselPath;

    fn next(&mut self) -> Option<BesselPath> {
        if self.next >= self.end {
            return None;
        }
        let p = inverse_bessel_path(&self.grid, self.start_radius, self.seed, self.next).expect("radius validated");
        self.next += 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for BesselPaths {}

pub fn inverse_bessel_paths(grid: &TimeGrid, n_paths: u64, seed: u64, start_radius: f64) -> Result<BesselPaths> {
    if !(start_radius > 0.0 && start_radius.is_finite()) {
        return domain(format!("start radius must be > 0, got {start_radius}"));
    }
    Ok(BesselPaths { grid: *grid, start_radius, seed, next: 0, end: n_paths })
}
