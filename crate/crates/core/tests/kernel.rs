use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use volsup_core::kernel::{
    continuity_report, euler_svie, kernel_eval, kernel_l1, quad_weights, DriftRule, MonotonePolicy, PathwiseSolver,
    SolverOptions,
};
use volsup_core::parallel::map_indexed;
use volsup_core::rng::{stream_rng, Stream};
use volsup_core::stats::variance_estimate;
use volsup_core::{DriftSpec, Error, PowerLawKernel, SamplePath, TimeGrid};

fn ulps_apart(a: f64, b: f64) -> u64 {
    let (ia, ib) = (a.to_bits() as i64, b.to_bits() as i64);
    ia.abs_diff(ib)
}

#[test]
fn kernel_values() {
    let k = PowerLawKernel::new(1.0, 1.0).unwrap();
    assert_eq!(kernel_eval(&k, 1.0, 0.0).unwrap(), 1.0);
    assert_eq!(kernel_l1(&k, 2.0).unwrap(), 2.0);
    let k = PowerLawKernel::new(0.75, 2.0).unwrap();
    assert_relative_eq!(kernel_eval(&k, 1.0, 0.0).unwrap(), 2.0 * 0.5f64.sqrt(), max_relative = 1e-15);
    let k = PowerLawKernel::new(0.6, 1.0).unwrap();
    assert!(matches!(kernel_eval(&k, 1.0, 1.0), Err(Error::Domain(_))));
    assert_relative_eq!(kernel_l1(&k, 1.0).unwrap(), 0.2f64.sqrt() / 0.6, max_relative = 1e-15);
    assert_eq!(kernel_l1(&k, 0.0).unwrap(), 0.0);
    assert!(kernel_l1(&k, -1.0).is_err());
    assert!(PowerLawKernel::new(0.5, 1.0).is_err());
    assert!(PowerLawKernel::new(0.7, 0.0).is_err());
}

#[test]
fn continuity_closed_form() {
    let k = PowerLawKernel::new(1.0, 1.0).unwrap();
    let r = continuity_report(&k, 1.0, &[0.01]).unwrap();
    assert_relative_eq!(r.rows[0].sup_local_mass, 0.01, max_relative = 1e-12);

    let k = PowerLawKernel::new(0.7, 1.5).unwrap();
    let eps: Vec<f64> = (0..8).map(|j| 0.1 * 0.5f64.powi(j)).collect();
    let r = continuity_report(&k, 1.0, &eps).unwrap();
    for row in &r.rows {
        let exact = 1.5 * 0.4f64.sqrt() * row.eps.powf(0.7) / 0.7;
        assert_relative_eq!(row.sup_local_mass, exact, max_relative = 1e-10);
        assert_relative_eq!(row.closed_form, exact, max_relative = 1e-12);
    }
    assert!((r.gamma_hat.unwrap() - 0.7).abs() < 0.02);
    let r = continuity_report(&k, 1.0, &[0.01]).unwrap();
    assert_relative_eq!(r.rows[0].sup_local_mass, 0.053_953_946_2, max_relative = 1e-9);
    assert!(matches!(continuity_report(&k, 1.0, &[]), Err(Error::Usage(_))));
}

#[test]
fn weight_examples() {
    let k = PowerLawKernel::new(1.0, 1.0).unwrap();
    let g = TimeGrid::new(2.0, 8).unwrap();
    let w = quad_weights(&k, &g);
    for i in 0..=8 {
        for j in 0..i {
            assert_relative_eq!(w.get(i, j), 0.25, max_relative = 1e-15);
        }
    }
    let k = PowerLawKernel::new(0.7, 1.5).unwrap();
    let w = quad_weights(&k, &TimeGrid::new(1.0, 4).unwrap());
    assert_relative_eq!(w.row_sum(4), kernel_l1(&k, 1.0).unwrap(), max_relative = 1e-15);
    let w = quad_weights(&k, &TimeGrid::new(1.0, 0).unwrap());
    assert!(w.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn row_sums_match_l1_norm(alpha in 0.51f64..1.0, eta in 0.1f64..3.0, horizon in 0.1f64..5.0, n in 1usize..400) {
        let k = PowerLawKernel::new(alpha, eta).unwrap();
        let g = TimeGrid::new(horizon, n).unwrap();
        let w = quad_weights(&k, &g);
        for i in 1..=n {
            let exact = kernel_l1(&k, g.node(i)).unwrap();
            prop_assert!(ulps_apart(w.row_sum(i), exact) <= 8, "row {i}: {} vs {exact}", w.row_sum(i));
            prop_assert!(w.row(i).iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn solver_respects_a_priori_bounds(
        alpha in 0.55f64..1.0,
        eta in 0.2f64..2.0,
        slope in 0.0f64..5.0,
        seed in any::<u64>(),
        implicit in any::<bool>(),
    ) {
        let k = PowerLawKernel::new(alpha, eta).unwrap();
        let g = TimeGrid::new(1.0, 64).unwrap();
        let mut rng = stream_rng(seed, Stream::Auxiliary, 0);
        let mut acc = 0.0;
        let z: Vec<f64> = (0..=64).map(|_| { acc += 0.2 * rng.sample::<f64, _>(StandardNormal); acc }).collect();
        let z = SamplePath::new(g, z).unwrap();
        let drift = DriftSpec::new(move |_, y: f64| slope * y.max(0.0) + 0.1 * y.exp().min(1e3));
        let rule = if implicit { DriftRule::Implicit } else { DriftRule::LeftPoint };
        let options = SolverOptions { rule, ..SolverOptions::default() };
        let solver = PathwiseSolver::new(k, g, drift, options).unwrap();
        let x = solver.solve(&z).unwrap();
        let low = solver.lower_bound(&z);
        for i in 0..=64 {
            prop_assert!(x.at(i) <= z.at(i));
            prop_assert!(low.at(i) <= x.at(i), "node {i}: {} > {}", low.at(i), x.at(i));
        }
    }
}

#[test]
fn zero_drift_is_identity() {
    let k = PowerLawKernel::new(0.7, 1.5).unwrap();
    let g = TimeGrid::new(1.0, 16).unwrap();
    let z = SamplePath::new(g, (0..=16).map(|i| (i as f64).sin()).collect()).unwrap();
    let x = volsup_core::kernel::solve_pathwise(&z, &k, &DriftSpec::zero()).unwrap();
    assert_eq!(x, z);
}

#[test]
fn constant_drift_is_linear() {
    let k = PowerLawKernel::new(1.0, 1.0).unwrap();
    let g = TimeGrid::new(1.0, 32).unwrap();
    let z = SamplePath::constant(g, 0.3);
    let x = volsup_core::kernel::solve_pathwise(&z, &k, &DriftSpec::new(|_, _| 0.7)).unwrap();
    for i in 0..=32 {
        assert_relative_eq!(x.at(i), 0.3 - 0.7 * g.node(i), epsilon = 1e-14);
    }
}

fn ode_error(n: usize, rule: DriftRule) -> f64 {
    let k = PowerLawKernel::new(1.0, 1.0).unwrap();
    let g = TimeGrid::new(1.0, n).unwrap();
    let z = SamplePath::constant(g, 1.0);
    let options = SolverOptions { rule, ..SolverOptions::default() };
    let solver = PathwiseSolver::new(k, g, DriftSpec::new(|_, y: f64| y.max(0.0)), options).unwrap();
    let x = solver.solve(&z).unwrap();
    (0..=n).map(|i| (x.at(i) - (-g.node(i)).exp()).abs()).fold(0.0, f64::max)
}

#[test]
fn exponential_decay_oracle() {
    for rule in [DriftRule::LeftPoint, DriftRule::Implicit] {
        let errors: Vec<f64> = [128, 256, 512, 1024].iter().map(|&n| ode_error(n, rule)).collect();
        assert!(errors[2] <= 5e-3, "{rule:?}: {errors:?}");
        for w in errors.windows(2) {
            let ratio = w[1] / w[0];
            assert!(ratio > 0.45 && ratio < 0.55, "{rule:?}: {errors:?}");
        }
    }
}

#[test]
fn decreasing_drift_policy() {
    let k = PowerLawKernel::new(0.7, 1.0).unwrap();
    let g = TimeGrid::new(1.0, 8).unwrap();
    let bad = DriftSpec::new(|_, y: f64| (-y).exp());
    assert!(matches!(PathwiseSolver::new(k, g, bad.clone(), SolverOptions::default()), Err(Error::Domain(_))));
    let options = SolverOptions { policy: MonotonePolicy::SkipBounds, ..SolverOptions::default() };
    let solver = PathwiseSolver::new(k, g, bad, options).unwrap();
    assert!(!solver.bounds_hold());
    let negative = DriftSpec::new(|_, y: f64| y);
    assert!(PathwiseSolver::new(k, g, negative, SolverOptions::default()).is_err());
}

#[test]
fn solver_rejects_nan_input() {
    let k = PowerLawKernel::new(0.7, 1.0).unwrap();
    let g = TimeGrid::new(1.0, 4).unwrap();
    let z = SamplePath::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).unwrap();
    let solver = PathwiseSolver::new(k, g, DriftSpec::zero(), SolverOptions::default()).unwrap();
    assert!(matches!(solver.solve(&z), Err(Error::Input(_))));
}

#[test]
fn implicit_rule_reports_non_convergence() {
    let k = PowerLawKernel::new(1.0, 1.0).unwrap();
    let g = TimeGrid::new(1.0, 2).unwrap();
    let steep = DriftSpec::new(|_, y: f64| 50.0 * y.max(0.0));
    let options = SolverOptions { rule: DriftRule::Implicit, ..SolverOptions::default() };
    let solver = PathwiseSolver::new(k, g, steep, options).unwrap();
    let err = solver.solve(&SamplePath::constant(g, 1.0)).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)));
    assert!(err.to_string().contains("node 1"));
}

#[test]
fn euler_examples() {
    let k = PowerLawKernel::new(1.0, 1.0).unwrap();
    let g = TimeGrid::new(1.0, 10).unwrap();
    let y = euler_svie(&k, &|_, _| 1.0, &|_, _| 0.0, 0.5, &[0.3; 10], &g).unwrap();
    for i in 0..=10 {
        assert_relative_eq!(y.at(i), 0.5 + g.node(i), epsilon = 1e-14);
    }
    let empty = TimeGrid::new(1.0, 0).unwrap();
    assert_eq!(euler_svie(&k, &|_, _| 1.0, &|_, _| 1.0, 0.5, &[], &empty).unwrap().values(), &[0.5]);
    assert!(euler_svie(&k, &|_, _| 1.0, &|_, _| 1.0, 0.5, &[0.1], &g).is_err());
    assert!(matches!(euler_svie(&k, &|_, _| f64::NAN, &|_, _| 1.0, 0.5, &[0.1; 10], &g), Err(Error::Numeric(_))));
}

#[test]
fn euler_noise_has_rl_variance() {
    let k = PowerLawKernel::new(0.7, 1.5).unwrap();
    let g = TimeGrid::new(1.0, 64).unwrap();
    let h = g.step().sqrt();
    let ends = map_indexed(10_000, |i| {
        let mut rng = stream_rng(3, Stream::Auxiliary, i);
        let db: Vec<f64> = (0..64).map(|_| h * rng.sample::<f64, _>(StandardNormal)).collect();
        euler_svie(&k, &|_, _| 0.0, &|_, _| 1.0, 0.0, &db, &g).unwrap().terminal()
    });
    let var = variance_estimate(&ends).unwrap();
    assert!(var.within(1.5 * 1.5, 3.0), "{var:?}");
}
