use std::f64::consts::E;

use crate::error::{domain, numeric, Result};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};

/// A distribution on the real line described by its quantile function.
pub trait QuantileModel: Send + Sync {
    fn name(&self) -> String;

    /// `F⁻¹(p)` for `p` in `(0, 1)`.
    fn quantile(&self, p: f64) -> f64;

    /// `F⁻¹(1 - eps)`, accurate for `eps` far below machine epsilon.
    fn upper_quantile(&self, eps: f64) -> f64 {
        self.quantile(1.0 - eps)
    }

    fn cdf(&self, x: f64) -> f64;

    fn mean(&self) -> f64;

    /// `∫_t^1 F⁻¹(s) ds`, by quadrature in `1 - s` unless overridden.
    fn tail_integral(&self, t: f64) -> Result<f64> {
        integrate(|e| self.upper_quantile(e), 0.0, 1.0 - t, Tolerance::relative(1e-12).with_abs(1e-15))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Uniform;

impl QuantileModel for Uniform {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn quantile(&self, p: f64) -> f64 {
        p
    }

    fn upper_quantile(&self, eps: f64) -> f64 {
        1.0 - eps
    }

    fn cdf(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    fn mean(&self) -> f64 {
        0.5
    }
}

/// Exponential law with rate 1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Exponential;

impl QuantileModel for Exponential {
    fn name(&self) -> String {
        "exponential".into()
    }

    fn quantile(&self, p: f64) -> f64 {
        -(-p).ln_1p()
    }

    fn upper_quantile(&self, eps: f64) -> f64 {
        -eps.ln()
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-x).exp_m1()
        }
    }

    fn mean(&self) -> f64 {
        1.0
    }
}

/// Density `c / (x^2 (ln x)^alpha)` on `x ≥ e`, `alpha` in `(1, 2]`.
///
/// The mean is finite but `∫ x log x dF` diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoTail {
    alpha: f64,
    c: f64,
}

impl ParetoTail {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return domain(format!("pareto_tail needs alpha in (1, 2], got {alpha}"));
        }
        let mut p = Self { alpha, c: 1.0 };
        // ∫_e^∞ dx / (x^2 (ln x)^alpha) = e^{-1} J(1).
        p.c = E / p.j(1.0)?;
        Ok(p)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Normalizing constant of the density.
    pub fn constant(&self) -> f64 {
        self.c
    }

    /// `J(L) = ∫_0^∞ e^{-v} (L + v)^{-alpha} dv`, so that the survival
    /// function at `x = e^L` is `c e^{-L} J(L)`.
    fn j(&self, l: f64) -> Result<f64> {
        let a = self.alpha;
        integrate_to_infinity(|v| (-v).exp() * (l + v).powf(-a), 0.0, Tolerance::relative(1e-13))
    }

    fn log_survival(&self, l: f64) -> Result<f64> {
        Ok(self.c.ln() - l + self.j(l)?.ln())
    }

    /// `ln F⁻¹(1 - eps)` by safeguarded Newton iteration.
    fn log_upper_quantile(&self, eps: f64) -> Result<f64> {
        if eps >= 1.0 {
            return Ok(1.0);
        }
        let target = eps.ln();
        let mut l = (self.c.ln() - target).max(1.0);
        l = (l - self.alpha * l.ln()).max(1.0);
        let (mut lo, mut hi) = (1.0f64, f64::INFINITY);
        for _ in 0..100 {
            let j = self.j(l)?;
            let g = self.c.ln() - l + j.ln() - target;
            if g > 0.0 {
                lo = l;
            } else {
                hi = hi.min(l);
            }
            let slope = -l.powf(-self.alpha) / j;
            let mut next = l - g / slope;
            if (next - l).abs() <= 1e-13 * l || g.abs() <= 1e-15 {
                return Ok(next);
            }
            if !(next >= lo && next <= hi) {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
            }
            l = next;
        }
        numeric(format!("pareto_tail quantile did not converge at eps = {eps:e}"))
    }

    /// `∫_x^∞ y f(y) dy = c (ln x)^{1 - alpha} / (alpha - 1)` for `x ≥ e`.
    pub fn partial_mean(&self, x: f64) -> f64 {
        self.c * x.max(E).ln().powf(1.0 - self.alpha) / (self.alpha - 1.0)
    }
}

impl QuantileModel for ParetoTail {
    fn name(&self) -> String {
        format!("pareto_tail({})", self.alpha)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.upper_quantile(1.0 - p)
    }

    fn upper_quantile(&self, eps: f64) -> f64 {
        self.log_upper_quantile(eps).map_or(f64::NAN, f64::exp)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= E {
            0.0
        } else {
            self.log_survival(x.ln()).map_or(f64::NAN, |s| -s.exp_m1())
        }
    }

    fn mean(&self) -> f64 {
        self.partial_mean(E)
    }

    fn tail_integral(&self, t: f64) -> Result<f64> {
        let x = self.log_upper_quantile(1.0 - t)?.exp();
        Ok(self.partial_mean(x))
    }
}

/// Built-in distribution by name: `uniform`, `exponential` or `pareto_tail`.
pub fn builtin(name: &str, alpha: f64) -> Result<Box<dyn QuantileModel>> {
    match name {
        "uniform" => Ok(Box::new(Uniform)),
        "exponential" => Ok(Box::new(Exponential)),
        "pareto_tail" | "pareto" => Ok(Box::new(ParetoTail::new(alpha)?)),
        other => domain(format!("unknown distribution '{other}' (expected uniform, exponential or pareto_tail)")),
    }
}
