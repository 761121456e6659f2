use crate::error::{domain, input, Result};

/// Uniform time grid `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return domain(format!("grid horizon must be positive and finite, got {horizon}"));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Step size; zero for a single-node grid.
    pub fn step(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            self.horizon / self.n_steps as f64
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else if i == self.n_steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        if self.n_steps == 0 {
            return 0;
        }
        let x = (t / self.horizon * self.n_steps as f64).round();
        x.clamp(0.0, self.n_steps as f64) as usize
    }

    /// Same horizon with twice as many steps.
    pub fn refined(&self) -> Self {
        Self { horizon: self.horizon, n_steps: self.n_steps * 2 }
    }
}

/// Values of a process at the nodes of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return input(format!("path has {} values but the grid has {} nodes", values.len(), grid.len()));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Largest node value (NaN-free paths assumed).
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn has_nan(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }
}
