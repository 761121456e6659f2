use super::quantile::QuantileModel;
use crate::error::{domain, usage, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::quadrature::{integrate, Tolerance};
use crate::stats::{geometric_cauchy, CAUCHY_RATIO};

fn check_probability(t: f64, what: &str) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return domain(format!("{what} must lie in (0, 1), got {t}"));
    }
    Ok(())
}

/// Hardy–Littlewood maximal function `H_F(t) = (1/(1-t)) ∫_t^1 F⁻¹(s) ds`.
pub fn hl_maximal(f: &dyn QuantileModel, t: f64) -> Result<f64> {
    check_probability(t, "t")?;
    Ok(f.tail_integral(t)? / (1.0 - t))
}

/// Dyadic truncation levels used by [`stein_check`].
pub const STEIN_LEVELS: usize = 48;
/// Trailing increments that must contract for the integral to count as finite.
pub const STEIN_WINDOW: usize = 8;

/// Truncation ladder for `∫ |x| log⁺|x| F(dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinReport {
    /// Integral over `s ≤ 1 - 2^{-k-1}`, `k = 0, 1, ...`.
    pub partial_integrals: Vec<f64>,
    pub increments: Vec<f64>,
    /// `None` when the ladder diverges.
    pub xlogx_integral: Option<f64>,
    pub predicts_h_in_l1: bool,
}

fn xlogx_plus(x: f64) -> f64 {
    let a = x.abs();
    if a > 1.0 {
        a * a.ln()
    } else {
        0.0
    }
}

/// Stein's criterion: `H_F` is integrable iff `∫ |x| log⁺|x| F(dx)` is finite.
///
/// The integral over `s` is split into dyadic bands `1 - s ∈ [2^{-k-1}, 2^{-k}]`
/// and declared infinite when the last [`STEIN_WINDOW`] band contributions
/// fail the geometric Cauchy test.
pub fn stein_check(f: &dyn QuantileModel) -> Result<SteinReport> {
    let tol = Tolerance::relative(1e-10).with_abs(1e-300);
    let g = |e: f64| xlogx_plus(f.upper_quantile(e));
    let mut increments = Vec::with_capacity(STEIN_LEVELS);
    // The lower band s in (0, 1/2] may reach a left endpoint singularity.
    let lower = integrate(|s| xlogx_plus(f.quantile(s)), 0.0, 0.5, tol)?;
    increments.push(lower);
    for k in 1..STEIN_LEVELS {
        let hi = 0.5f64.powi(k as i32);
        increments.push(integrate(g, 0.5 * hi, hi, tol)?);
    }
    let mut partial_integrals = Vec::with_capacity(STEIN_LEVELS);
    let mut acc = 0.0;
    for d in &increments {
        acc += d;
        partial_integrals.push(acc);
    }
    let window = &increments[STEIN_LEVELS - STEIN_WINDOW..];
    let finite = geometric_cauchy(window, CAUCHY_RATIO);
    Ok(SteinReport { xlogx_integral: finite.then_some(acc), predicts_h_in_l1: finite, partial_integrals, increments })
}

/// One path of the Dubins–Gilat martingale on `((0, 1), ds)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DubinsGilatPath {
    /// `X_t(s)` at the grid nodes.
    pub path: SamplePath,
    /// The sample point `s`, also the jump time.
    pub jump_time: f64,
    /// `H_F(s)`, the value just before the jump.
    pub pre_jump: f64,
    /// `F⁻¹(s)`, the closing value.
    pub closing: f64,
    /// Pathwise supremum over `[0, 1]`.
    pub sup: f64,
}

/// `X_t(s) = H_F(t)` for `t ≤ s` and `F⁻¹(s)` afterwards, on a grid over `[0, 1]`.
pub fn dg_path(f: &dyn QuantileModel, s: f64, grid: &TimeGrid) -> Result<DubinsGilatPath> {
    check_probability(s, "s")?;
    if grid.horizon() != 1.0 {
        return domain(format!("Dubins–Gilat paths live on [0, 1], got horizon {}", grid.horizon()));
    }
    let closing = f.quantile(s);
    let values = grid
        .nodes()
        .into_iter()
        .map(|t| {
            if t == 0.0 {
                Ok(f.mean())
            } else if t <= s {
                hl_maximal(f, t)
            } else {
                Ok(closing)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let pre_jump = hl_maximal(f, s)?;
    let path = SamplePath::new(*grid, values)?;
    let sup = path.max().max(pre_jump);
    Ok(DubinsGilatPath { path, jump_time: s, pre_jump, closing, sup })
}

/// Residual of the martingale identity on `{U ≥ t1}`:
/// `(1/(1-t1)) [∫_{t1}^{t2} F⁻¹ + (1-t2) H_F(t2)] - H_F(t1)`.
pub fn dg_martingale_identity(f: &dyn QuantileModel, t1: f64, t2: f64) -> Result<f64> {
    check_probability(t1, "t1")?;
    check_probability(t2, "t2")?;
    if !(t1 < t2) {
        return usage(format!("martingale identity needs t1 < t2, got t1={t1}, t2={t2}"));
    }
    let middle = integrate(|e| f.upper_quantile(e), 1.0 - t2, 1.0 - t1, Tolerance::relative(1e-12).with_abs(1e-15))?;
    let h2 = hl_maximal(f, t2)?;
    let h1 = hl_maximal(f, t1)?;
    Ok((middle + (1.0 - t2) * h2) / (1.0 - t1) - h1)
}

#[cfg(test)]
mod tests {
    use super::super::quantile::{Exponential, Uniform};
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((hl_maximal(&Uniform, 0.5).unwrap() - 0.75).abs() < 1e-14);
        assert!((hl_maximal(&Exponential, 0.5).unwrap() - (1.0 - 0.5f64.ln())).abs() < 1e-10);
        assert!(hl_maximal(&Uniform, 0.0).is_err());
        assert!(hl_maximal(&Uniform, 1.0).is_err());
    }

    #[test]
    fn uniform_path_examples() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = dg_path(&Uniform, 0.5, &g).unwrap();
        assert!((p.path.at(1) - 0.625).abs() < 1e-14);
        assert_eq!(p.path.at(3), 0.5);
        assert!((p.sup - 0.75).abs() < 1e-14);
        assert!(dg_path(&Uniform, 1.5, &g).is_err());
    }

    #[test]
    fn identity_ordering() {
        assert!(matches!(dg_martingale_identity(&Uniform, 0.8, 0.2), Err(crate::Error::Usage(_))));
        assert!(dg_martingale_identity(&Uniform, 0.2, 0.8).unwrap().abs() < 1e-12);
    }

    #[test]
    fn stein_uniform_is_zero() {
        let r = stein_check(&Uniform).unwrap();
        assert_eq!(r.xlogx_integral, Some(0.0));
        assert!(r.predicts_h_in_l1);
    }
}
