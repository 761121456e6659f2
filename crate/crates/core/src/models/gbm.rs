use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::rng::{stream_rng, Stream};

/// Geometric Brownian motion `dX = sigma X dW`, sampled exactly at the nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gbm {
    sigma: f64,
    x0: f64,
    grid: TimeGrid,
}

impl Gbm {
    pub fn new(sigma: f64, x0: f64, grid: TimeGrid) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return domain(format!("GBM volatility must be ≥ 0, got {sigma}"));
        }
        if !(x0.is_finite() && x0 > 0.0) {
            return domain(format!("GBM start must be > 0, got {x0}"));
        }
        Ok(Self { sigma, x0, grid })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn path(&self, seed: u64, index: u64) -> SamplePath {
        let n = self.grid.n_steps();
        let h = self.grid.step();
        let sd = self.sigma * h.sqrt();
        let drift = -0.5 * self.sigma * self.sigma * h;
        let mut rng = stream_rng(seed, Stream::Gbm, index);
        let mut log_x = 0.0f64;
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.x0);
        for _ in 0..n {
            log_x += sd * rng.sample::<f64, _>(StandardNormal) + drift;
            out.push(self.x0 * log_x.exp());
        }
        SamplePath::new(self.grid, out).expect("lengths match")
    }

    /// `(max, terminal)` of path `index` without keeping the path.
    pub fn sup_and_terminal(&self, seed: u64, index: u64) -> (f64, f64) {
        let p = self.path(seed, index);
        (p.max(), p.terminal())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volatility_is_constant() {
        let g = Gbm::new(0.0, 2.0, TimeGrid::new(1.0, 8).unwrap()).unwrap();
        assert_eq!(g.path(1, 0), SamplePath::constant(*g.grid(), 2.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        assert!(Gbm::new(-0.1, 1.0, grid).is_err());
        assert!(Gbm::new(0.2, 0.0, grid).is_err());
    }
}
