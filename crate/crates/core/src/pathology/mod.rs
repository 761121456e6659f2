//! Maximal functions of distributions, the Dubins–Gilat martingale and a
//! stopped inverse Bessel(3) construction with a non-integrable supremum.

mod bessel;
mod maximal;
mod quantile;
mod stopping;

pub use bessel::{
    inverse_bessel_exceedance, inverse_bessel_mean, inverse_bessel_path, inverse_bessel_paths, maximal_identity,
    BesselPath, BesselPaths, PathSummary, M_CAP,
};
pub use maximal::{
    dg_martingale_identity, dg_path, hl_maximal, stein_check, DubinsGilatPath, SteinReport, STEIN_LEVELS, STEIN_WINDOW,
};
pub use quantile::{builtin, Exponential, ParetoTail, QuantileModel, Uniform};
pub use stopping::{
    harmonic, sample_level, sample_levels, stopped_construction_report, CSequence, Level, StoppedReport,
    StoppedTailRow, REPORT_LEVELS,
};
