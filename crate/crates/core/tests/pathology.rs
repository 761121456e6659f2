use std::f64::consts::E;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;

use volsup_core::parallel::map_indexed;
use volsup_core::pathology::{
    builtin, dg_martingale_identity, dg_path, hl_maximal, inverse_bessel_exceedance, inverse_bessel_mean,
    inverse_bessel_path, inverse_bessel_paths, sample_level, sample_levels, stein_check, stopped_construction_report,
    CSequence, Exponential, Level, ParetoTail, QuantileModel, Uniform,
};
use volsup_core::rng::{stream_rng, Stream};
use volsup_core::stats::{binomial_stderr, MCEstimate};
use volsup_core::{Error, TimeGrid};

fn models() -> Vec<Box<dyn QuantileModel>> {
    vec![
        Box::new(Uniform),
        Box::new(Exponential),
        Box::new(ParetoTail::new(1.5).unwrap()),
        Box::new(ParetoTail::new(2.0).unwrap()),
    ]
}

#[test]
fn maximal_function_examples() {
    assert_relative_eq!(hl_maximal(&Uniform, 0.5).unwrap(), 0.75, max_relative = 1e-14);
    assert_relative_eq!(hl_maximal(&Exponential, 0.5).unwrap(), 1.0 + 2.0f64.ln(), max_relative = 1e-12);
    for f in models() {
        assert!((hl_maximal(&*f, 1e-12).unwrap() - f.mean()).abs() < 1e-8, "{}", f.name());
        assert!(matches!(hl_maximal(&*f, 0.0), Err(Error::Domain(_))));
        assert!(matches!(hl_maximal(&*f, 1.0), Err(Error::Domain(_))));
    }
}

#[test]
fn maximal_function_is_monotone() {
    for f in models() {
        let mut prev = f64::NEG_INFINITY;
        for j in 1..=1000 {
            let t = j as f64 / 1001.0;
            let h = hl_maximal(&*f, t).unwrap();
            assert!(h >= prev, "{} at t={t}: {h} < {prev}", f.name());
            assert!(h >= f.quantile(t) - 1e-12);
            prev = h;
        }
    }
}

#[test]
fn pareto_tail_integral_matches_quadrature() {
    use volsup_core::quadrature::{integrate, Tolerance};
    let p = ParetoTail::new(1.5).unwrap();
    for t in [0.1, 0.5, 0.9] {
        let direct = integrate(|e| p.upper_quantile(e), 1e-14, 1.0 - t, Tolerance::relative(1e-10)).unwrap();
        // The truncated tail contributes ∫ above 1 - 1e-14, added in closed form.
        let tail = p.partial_mean(p.upper_quantile(1e-14));
        assert_relative_eq!(direct + tail, p.tail_integral(t).unwrap(), max_relative = 1e-7);
    }
}

#[test]
fn dubins_gilat_examples() {
    let g = TimeGrid::new(1.0, 4).unwrap();
    let p = dg_path(&Uniform, 0.5, &g).unwrap();
    assert_relative_eq!(p.path.at(1), 0.625, max_relative = 1e-14);
    assert_eq!(p.path.at(3), 0.5);
    assert_relative_eq!(p.sup, 0.75, max_relative = 1e-14);
    assert!(dg_martingale_identity(&Uniform, 0.2, 0.8).unwrap().abs() <= 1e-10);
    assert!(dg_martingale_identity(&Exponential, 0.1, 0.9).unwrap().abs() <= 1e-8);
    assert!(dg_martingale_identity(&Exponential, 0.4, 0.4 + 1e-9).unwrap().abs() <= 1e-8);
    assert!(matches!(dg_martingale_identity(&Uniform, 0.5, 0.5), Err(Error::Usage(_))));
    assert!(matches!(dg_path(&Uniform, 0.0, &g), Err(Error::Domain(_))));
}

#[test]
fn dubins_gilat_sup_is_maximal_function() {
    let g = TimeGrid::new(1.0, 16).unwrap();
    let mut rng = stream_rng(17, Stream::Auxiliary, 0);
    for f in models() {
        for _ in 0..1000 {
            let s = rng.random_range(1e-6..1.0 - 1e-6);
            let p = dg_path(&*f, s, &g).unwrap();
            assert_eq!(p.sup, hl_maximal(&*f, s).unwrap(), "{} at s={s}", f.name());
        }
    }
}

#[test]
fn dubins_gilat_mean_is_constant() {
    // E[X_t] = t F⁻¹-mass below t plus (1 - t) H_F(t) = mean of F.
    for f in models() {
        for t in [0.1, 0.5, 0.9] {
            let below = volsup_core::quadrature::integrate(
                |s| f.quantile(s),
                0.0,
                t,
                volsup_core::quadrature::Tolerance::relative(1e-12).with_abs(1e-15),
            )
            .unwrap();
            let total = below + (1.0 - t) * hl_maximal(&*f, t).unwrap();
            assert_relative_eq!(total, f.mean(), max_relative = 1e-8);
        }
    }
}

#[test]
fn stein_dichotomy() {
    // ∫ x log x e^{-x} dx over x > 1.
    let exp = stein_check(&Exponential).unwrap();
    assert!(exp.predicts_h_in_l1);
    let expected = volsup_core::quadrature::integrate_to_infinity(
        |x| x * x.ln() * (-x).exp(),
        1.0,
        volsup_core::quadrature::Tolerance::relative(1e-12),
    )
    .unwrap();
    assert_relative_eq!(exp.xlogx_integral.unwrap(), expected, max_relative = 1e-8);
    assert!(stein_check(&Uniform).unwrap().predicts_h_in_l1);
    for alpha in [1.5, 2.0] {
        let r = stein_check(&ParetoTail::new(alpha).unwrap()).unwrap();
        assert!(!r.predicts_h_in_l1 && r.xlogx_integral.is_none(), "alpha {alpha}");
    }
    assert!(builtin("pareto_tail", 1.5).unwrap().name().starts_with("pareto_tail"));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn c_sequence_exponent_identity(p in prop::collection::vec(0.0f64..=1.0, 1..300)) {
        prop_assume!(p.iter().any(|v| *v > 0.0));
        let c = CSequence::from_tails(&p).unwrap();
        let mut prev = c.c(0);
        prop_assert_eq!(prev, 1.0);
        let mut exact = 0.0f64;
        for n in 1..=p.len() as u64 + 3 {
            if (n as usize) <= p.len() {
                exact += p[n as usize - 1];
            }
            let cn = c.c(n);
            prop_assert!(cn >= prev && cn > 1.0);
            // exp(c_n) - e vs Σ p_k, to 8 ulps of e + Σ p_k.
            let ulp = f64::EPSILON * (E + exact);
            prop_assert!((cn.exp() - E - exact).abs() <= 8.0 * ulp, "n={}: {} vs {}", n, cn.exp() - E, exact);
            prev = cn;
        }
    }
}

#[test]
fn c_sequence_examples() {
    let c = CSequence::doob_maximal(1.0).unwrap();
    assert!((c.c(1) - (E + 1.0).ln()).abs() <= 1e-12);
    assert_relative_eq!(c.c(1), 1.313_262, max_relative = 1e-6);
    for n in [10u64, 1000, 200_000] {
        let ulp = f64::EPSILON * (E + c.tail_sum(n));
        assert!((c.c(n).exp() - E - c.tail_sum(n)).abs() <= 8.0 * ulp);
    }
    assert!(matches!(CSequence::from_tails(&[0.5, 1.2]), Err(Error::Input(_))));
    assert!(CSequence::from_tails(&[0.0; 4]).is_err());
}

#[test]
fn level_survival() {
    let c = CSequence::doob_maximal(1.0).unwrap();
    let n = 1_000_000u64;
    let levels = sample_levels(&c, n, 5);
    assert!(levels.iter().all(|l| l.value() >= 1.0));
    let over = levels.iter().filter(|l| l.value() > 5.0).count() as u64;
    let est = MCEstimate::proportion(over, n);
    let exact = 1.0 / c.c(5);
    assert!((est.mean - exact).abs() <= 3.0 * binomial_stderr(exact, n), "{est:?} vs {exact}");

    let mut rng = stream_rng(1, Stream::Level, 0);
    assert!(matches!(sample_level(&c, &mut rng), Level::Finite(k) if k >= 1));
}

#[test]
fn inverse_bessel_examples() {
    let g = TimeGrid::new(1.0, 16).unwrap();
    let n = 100_000u64;
    let terminal = map_indexed(n, |i| inverse_bessel_path(&g, 1.0, 6, i).unwrap().m.terminal());
    let e = MCEstimate::from_samples(&terminal).unwrap();
    assert_relative_eq!(inverse_bessel_mean(1.0, 1.0), 0.682_689_492_137_085_9, max_relative = 1e-12);
    assert!(e.within(0.682_689, 3.0), "{e:?}");

    let mut paths = inverse_bessel_paths(&g, 3, 1, 1.0).unwrap();
    assert_eq!(paths.len(), 3);
    assert!(paths.all(|p| p.m.at(0) == 1.0));
    assert!(matches!(inverse_bessel_paths(&g, 3, 1, -1.0), Err(Error::Domain(_))));
}

#[test]
fn inverse_bessel_exceedance_at_short_horizon() {
    let g = TimeGrid::new(4.0, 16).unwrap();
    let n = 100_000u64;
    let sups = map_indexed(n, |i| inverse_bessel_path(&g, 1.0, 7, i).unwrap().sup());
    for level in [1.5, 2.0, 4.0] {
        let p = sups.iter().filter(|s| **s > level).count() as f64 / n as f64;
        let exact = inverse_bessel_exceedance(1.0, level, 4.0);
        assert!((p - exact).abs() <= 3.0 * binomial_stderr(exact, n), "level {level}: {p} vs {exact}");
    }
}

fn summaries(horizon: f64, n: u64) -> Vec<volsup_core::pathology::PathSummary> {
    let g = TimeGrid::new(horizon, 32).unwrap();
    map_indexed(n, |i| inverse_bessel_path(&g, 1.0, 9, i).unwrap().summary())
}

#[test]
fn stopped_report_tails_and_contrast() {
    let n = 50_000u64;
    let horizon = 1e6;
    let paths = summaries(horizon, n);
    let c = CSequence::doob_maximal(1.0).unwrap();
    let levels = sample_levels(&c, n, 10);
    let r = stopped_construction_report(&paths, &levels, &c, 1.0, horizon).unwrap();
    for row in &r.rows {
        assert!((row.empirical.mean - row.oracle).abs() <= 3.0 * binomial_stderr(row.oracle, n), "{row:?}");
    }
    assert_relative_eq!(r.rows[2].oracle, (1.0 / 3.0) / c.c(3), max_relative = 1e-15);
    assert!(r.series_divergent);
    assert!(r.series.windows(2).all(|w| w[1].1 > w[0].1));

    // No stopping: tails are 1/n.
    let never = vec![Level::Infinite; n as usize];
    let free = stopped_construction_report(&paths, &never, &c, 1.0, horizon).unwrap();
    for row in &free.rows {
        let exact = 1.0 / row.n as f64;
        assert!((row.empirical.mean - exact).abs() <= 3.0 * binomial_stderr(exact, n) + 1e-3, "{row:?}");
    }
    // Deterministic level 4: nothing exceeds 4.
    let fixed = vec![Level::Finite(4); n as usize];
    let capped = stopped_construction_report(&paths, &fixed, &c, 1.0, horizon).unwrap();
    assert!(capped.rows.iter().filter(|r| r.n >= 4).all(|r| r.empirical.mean == 0.0));
    // Randomized level sits strictly between.
    for k in 5..=20 {
        let (lo, mid, hi) = (&capped.rows[k - 1], &r.rows[k - 1], &free.rows[k - 1]);
        assert!(lo.empirical.mean < mid.empirical.mean && mid.empirical.mean < hi.empirical.mean);
    }

    assert!(matches!(stopped_construction_report(&paths[..3], &levels[..2], &c, 1.0, horizon), Err(Error::Usage(_))));
}

#[test]
fn grid_stopping_is_reported_beside_exact_stopping() {
    let n = 2000u64;
    let paths = summaries(10.0, n);
    let c = CSequence::doob_maximal(1.0).unwrap();
    let levels = sample_levels(&c, n, 3);
    let r = stopped_construction_report(&paths, &levels, &c, 1.0, 10.0).unwrap();
    for row in &r.rows {
        // The first grid crossing never sees more than the continuous path.
        assert!(row.grid_empirical <= row.empirical.mean);
    }
}
