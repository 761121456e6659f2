//! Monte Carlo functionals of path suprema.
//!
//! Per-path quantities are computed in parallel into index-ordered buffers
//! and reduced sequentially, so every estimate is independent of the number
//! of worker threads.

mod bounds;
mod measure;
mod sup;
mod tails;

use std::fmt;

use crate::stats::MCEstimate;

pub use bounds::{generic_sup_bound, rbergomi_sup_bound, rbergomi_sup_bound_with, MonteCarloConfig, SupBoundReport};
pub use measure::{share_measure_check, weighted_ks, weighted_ks_test, KsTest, MeasureMode, ShareMeasureReport};
pub use sup::{
    doob_l1_check, doob_l1_from_samples, estimate_sup, estimate_sup_values, gbm_xlogx, gbm_xlogx_plus,
    gbm_xlogx_plus_quadrature, reverse_l1_check, DoobReport, DOOB_CONSTANT,
};
pub use tails::{dyadic_ladder, tail_sums, TailSumReport};

/// Number of combined standard errors a bound may be exceeded by before it
/// is declared violated.
pub const VIOLATION_SIGMAS: f64 = 3.0;

/// Which side of the inequality `lhs` is supposed to be on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `lhs ≤ rhs`
    Upper,
    /// `lhs ≥ rhs`
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    ViolatedWithinNoise,
    Violated,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::ViolatedWithinNoise => "violated-within-noise",
            Verdict::Violated => "violated",
        }
    }

    pub fn is_violated(&self) -> bool {
        *self == Verdict::Violated
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An inequality between a Monte Carlo left-hand side and a bound.
///
/// An exact bound is stored as an estimate with zero standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    /// Distance to the bound, positive when the inequality holds.
    pub slack: f64,
    pub direction: Direction,
    pub verdict: Verdict,
}

impl BoundReport {
    pub fn new(lhs: MCEstimate, rhs: MCEstimate, direction: Direction) -> Self {
        let slack = match direction {
            Direction::Upper => rhs.mean - lhs.mean,
            Direction::Lower => lhs.mean - rhs.mean,
        };
        let noise = lhs.stderr.hypot(rhs.stderr);
        let verdict = if slack >= 0.0 {
            Verdict::Holds
        } else if -slack > VIOLATION_SIGMAS * noise {
            Verdict::Violated
        } else {
            Verdict::ViolatedWithinNoise
        };
        Self { lhs, rhs, slack, direction, verdict }
    }

    pub fn upper(lhs: MCEstimate, rhs: MCEstimate) -> Self {
        Self::new(lhs, rhs, Direction::Upper)
    }

    pub fn lower(lhs: MCEstimate, rhs: MCEstimate) -> Self {
        Self::new(lhs, rhs, Direction::Lower)
    }

    pub fn rhs_is_exact(&self) -> bool {
        self.rhs.stderr == 0.0
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

pub(crate) fn exact(value: f64) -> MCEstimate {
    MCEstimate::new(value, 0.0, 0)
}
