//! One function per subcommand. Each returns its rows and series.
//!
//! CSV columns (every command): `check,quantity,value,stderr,n,oracle,oracle_provenance,verdict`.

use std::cmp::Ordering;
use std::f64::consts::E;

use volsup_core::estimators::{
    doob_l1_from_samples, gbm_xlogx, gbm_xlogx_plus, gbm_xlogx_plus_quadrature, generic_sup_bound, rbergomi_sup_bound,
    reverse_l1_check, share_measure_check, MeasureMode, MonteCarloConfig, SupBoundReport,
};
use volsup_core::kernel::{continuity_report, kernel_l1, quad_weights};
use volsup_core::models::{
    affine_mean_curve, AffineVolterraParams, BergomiSimulator, Gbm, GenericSimulator, RoughBergomiParams,
};
use volsup_core::parallel::{map_indexed, try_map_indexed};
use volsup_core::pathology::{
    builtin, dg_martingale_identity, dg_path, hl_maximal, inverse_bessel_path, sample_levels, stein_check,
    stopped_construction_report, CSequence, QuantileModel,
};
use volsup_core::rng::derive_seed;
use volsup_core::stats::{binomial_stderr, variance_estimate};
use volsup_core::{Error, MCEstimate, PowerLawKernel, Result, TimeGrid};

use crate::config::Settings;
use crate::report::{Provenance, Report, Row, RowVerdict};

pub fn run(s: &Settings) -> Result<Report> {
    let report = dispatch(s)?;
    if let Some(r) = report.non_finite() {
        return Err(Error::Numeric(format!(
            "{}/{} is not finite (value {}, stderr {:?}, oracle {:?})",
            r.check, r.quantity, r.value, r.stderr, r.oracle
        )));
    }
    Ok(report)
}

fn dispatch(s: &Settings) -> Result<Report> {
    match s.command.as_deref().unwrap_or_default() {
        "kernel-check" => kernel_check(s),
        "simulate" => simulate(s),
        "sup-bound" => sup_bound(s),
        "measure-check" => measure_check(s),
        "doob-check" => doob_check(s),
        "reverse-l1" => reverse_l1(s),
        "hl-maximal" => hl(s),
        "dubins-gilat" => dubins_gilat(s),
        "stopped-lm" => stopped_lm(s),
        "affine-heston" => affine_heston(s),
        other => Err(Error::Usage(format!("unknown command '{other}'"))),
    }
}

fn need<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::Usage(format!("missing setting '{key}'")))
}

macro_rules! get {
    ($s:ident . $key:ident) => {
        need(&$s.$key, stringify!($key))?
    };
}

fn sigmas(s: &Settings) -> Result<f64> {
    let k = s.sigmas.unwrap_or(3.0);
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("sigmas must be positive, got {k}")));
    }
    Ok(k)
}

fn mc(s: &Settings) -> Result<MonteCarloConfig> {
    Ok(MonteCarloConfig {
        horizon: get!(s.horizon),
        n_steps: get!(s.n_steps),
        n_paths: get!(s.n_paths),
        seed: get!(s.seed),
    })
}

fn bergomi(s: &Settings) -> Result<RoughBergomiParams> {
    RoughBergomiParams::new(get!(s.alpha), get!(s.eta), get!(s.rho), get!(s.v0), get!(s.s0))
}

/// Nodes at a quarter, half and all of the grid.
fn checkpoints(grid: &TimeGrid) -> Vec<usize> {
    let n = grid.n_steps();
    let mut nodes = vec![n / 4, n / 2, n];
    nodes.retain(|k| *k > 0);
    nodes.dedup();
    nodes
}

fn column<const N: usize>(rows: &[([f64; N], f64)], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r.0[j]).collect()
}

fn kernel_check(s: &Settings) -> Result<Report> {
    let k = PowerLawKernel::new(get!(s.alpha), get!(s.eta))?;
    let horizon: f64 = get!(s.horizon);
    let eps_max: f64 = get!(s.eps_max);
    let levels: usize = get!(s.eps_levels);
    let eps: Vec<f64> = (0..levels).map(|j| eps_max * 0.5f64.powi(j as i32)).collect();
    let c = continuity_report(&k, horizon, &eps)?;
    let mut r = Report::default();
    for row in &c.rows {
        let q = format!("eps={}", row.eps);
        r.exact("local_mass", &q, row.sup_local_mass, row.closed_form, Provenance::ClosedForm, 1e-9 * row.closed_form);
    }
    if let Some(g) = c.gamma_hat {
        r.exact("continuity", "gamma_hat", g, k.alpha(), Provenance::ClosedForm, 0.02);
    }
    if let Some(g) = c.l2_gamma_hat {
        r.exact("continuity", "l2_gamma_hat", g, 2.0 * k.alpha() - 1.0, Provenance::ClosedForm, 0.02);
    }
    if let Some(g) = c.shift_gamma_hat {
        r.value("continuity", "shift_gamma_hat", g);
    }
    let grid = TimeGrid::new(horizon, get!(s.n_steps))?;
    let w = quad_weights(&k, &grid);
    let l1 = kernel_l1(&k, horizon)?;
    r.exact("weights", "row_sum", w.row_sum(grid.n_steps()), l1, Provenance::ClosedForm, 1e-12 * l1);
    r.series(
        "continuity",
        vec!["eps", "sup_local_mass", "closed_form", "local_l2_mass", "shift_l1"],
        c.rows
            .iter()
            .map(|row| vec![row.eps, row.sup_local_mass, row.closed_form, row.local_l2_mass, row.shift_l1])
            .collect(),
    );
    Ok(r)
}

fn simulate(s: &Settings) -> Result<Report> {
    let p = bergomi(s)?;
    let cfg = mc(s)?;
    let k = sigmas(s)?;
    let grid = TimeGrid::new(cfg.horizon, cfg.n_steps)?;
    let sim = BergomiSimulator::new(p.clone(), grid)?;
    let nodes = checkpoints(&grid);
    let rows = try_map_indexed(cfg.n_paths, |i| {
        let path = sim.path(cfg.seed, i)?;
        let mut vals = [0.0; 6];
        for (j, &n) in nodes.iter().enumerate() {
            vals[j] = path.driver.y.at(n);
            vals[3 + j] = path.v.at(n);
        }
        let bad = path
            .tilde_y
            .values()
            .iter()
            .zip(path.driver.y.values())
            .filter(|(a, b)| !matches!(a.partial_cmp(b), Some(Ordering::Less | Ordering::Equal)))
            .count();
        Ok::<_, Error>((vals, path.s.terminal(), bad as f64))
    })?;
    let mut r = Report::default();
    let pairs: Vec<([f64; 6], f64)> = rows.iter().map(|x| (x.0, x.1)).collect();
    for (j, &n) in nodes.iter().enumerate() {
        let t = grid.node(n);
        let var = p.kernel().rl_variance(t);
        let q = format!("t={t}");
        r.against("rl_isometry", &q, &variance_estimate(&column(&pairs, j))?, var, Provenance::ClosedForm, k);
        let v = MCEstimate::from_samples(&column(&pairs, 3 + j))?;
        // Lognormal standard error; the sample one is unreliable for heavy tails.
        let se = p.v0() * (var.exp_m1() / v.n as f64).sqrt();
        r.compare("forward_variance", &q, &v, p.v0(), Provenance::ClosedForm, k, se);
    }
    let violations: f64 = rows.iter().map(|x| x.2).sum();
    r.exact("domination", "violations", violations, 0.0, Provenance::ClosedForm, 0.0);
    let terminal: Vec<f64> = rows.iter().map(|x| x.1).collect();
    r.against("martingale", "E[S_T]", &MCEstimate::from_samples(&terminal)?, p.s0(), Provenance::ClosedForm, k);

    let first = sim.path(cfg.seed, 0)?;
    r.series(
        "path0",
        vec!["t", "S", "v", "Y", "Y_tilde"],
        (0..grid.len())
            .map(|i| vec![grid.node(i), first.s.at(i), first.v.at(i), first.driver.y.at(i), first.tilde_y.at(i)])
            .collect(),
    );
    Ok(r)
}

fn bound_rows(r: &mut Report, b: &SupBoundReport, s0: f64, sigmas: f64) {
    r.bound("sup_bound", "first_bound", &b.bound, Provenance::MonteCarloBound);
    if let Some(f) = &b.forward_bound {
        r.bound("sup_bound", "forward_variance_bound", f, Provenance::ClosedForm);
    }
    r.bound("sup_bound", "doob_bound", &b.doob, Provenance::MonteCarloBound);
    r.against("martingale", "E[S_T]", &b.terminal, s0, Provenance::ClosedForm, sigmas);
    r.exact("domination", "violations", b.domination_violations as f64, 0.0, Provenance::ClosedForm, 0.0);
    if let Some(c) = &b.caveat {
        r.notes.push(c.clone());
    }
}

fn bound_series(b: &SupBoundReport, n_steps: usize) -> Vec<f64> {
    let fwd = b.forward_bound.map(|f| f.rhs.mean).unwrap_or(f64::NAN);
    vec![n_steps as f64, b.bound.lhs.mean, b.bound.lhs.stderr, b.bound.rhs.mean, fwd, b.doob.rhs.mean]
}

const BOUND_COLUMNS: [&str; 6] = ["n_steps", "sup_mean", "sup_stderr", "first_bound", "forward_bound", "doob_bound"];

fn sup_bound(s: &Settings) -> Result<Report> {
    let p = bergomi(s)?;
    let cfg = mc(s)?;
    let b = rbergomi_sup_bound(&p, &cfg)?;
    let mut r = Report::default();
    bound_rows(&mut r, &b, p.s0(), 3.0);
    let mut series = vec![bound_series(&b, cfg.n_steps)];
    if s.refine == Some(true) {
        let fine_cfg = MonteCarloConfig { n_steps: 2 * cfg.n_steps, ..cfg };
        let fine = rbergomi_sup_bound(&p, &fine_cfg)?;
        let se = fine.bound.lhs.stderr.hypot(b.bound.lhs.stderr);
        let q = format!("E[sup S] n_steps={}", fine_cfg.n_steps);
        r.compare("refinement", &q, &fine.bound.lhs, b.bound.lhs.mean, Provenance::RefinementMc, 3.0, se);
        series.push(bound_series(&fine, fine_cfg.n_steps));
    }
    r.series("sup_bound", BOUND_COLUMNS.to_vec(), series);
    Ok(r)
}

fn measure_check(s: &Settings) -> Result<Report> {
    let p = bergomi(s)?;
    let cfg = mc(s)?;
    let level: f64 = get!(s.ks_level);
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("ks_level must lie in (0, 1), got {level}")));
    }
    let mut r = Report::default();
    let mut series = Vec::new();
    let mut modes = vec![MeasureMode::ShareMeasure];
    if s.control == Some(true) {
        modes.push(MeasureMode::Control);
    }
    for mode in modes {
        let m = share_measure_check(&p, &cfg, mode)?;
        let (check, agree) = match mode {
            MeasureMode::ShareMeasure => ("share_measure", true),
            MeasureMode::Control => ("control", false),
        };
        let t = &m.test;
        let ok = if agree { t.p_value > level } else { t.p_value < level };
        r.rows.push(Row {
            check: check.into(),
            quantity: "ks_p_value".into(),
            value: t.p_value,
            stderr: None,
            n: Some(cfg.n_paths),
            oracle: Some(level),
            provenance: Provenance::Bootstrap,
            verdict: RowVerdict::pass_if(ok),
        });
        r.value(check, "ks_statistic", t.statistic);
        r.value(check, "effective_sample_size", t.effective_sample_size);
        if agree {
            r.against("martingale", "E[S_T]", &m.terminal, p.s0(), Provenance::ClosedForm, 3.0);
        }
        r.notes.extend(m.warnings.iter().cloned());
        series.push(vec![if agree { 0.0 } else { 1.0 }, t.statistic, t.p_value, t.effective_sample_size]);
    }
    r.series("ks", vec!["control", "statistic", "p_value", "effective_sample_size"], series);
    Ok(r)
}

fn gbm_samples(s: &Settings, sigma: f64, x0: f64) -> Result<(Vec<f64>, Vec<f64>, MonteCarloConfig)> {
    let cfg = mc(s)?;
    let g = Gbm::new(sigma, x0, cfg.grid()?)?;
    if cfg.n_paths < 2 {
        return Err(Error::Usage(format!("Monte Carlo runs need at least 2 paths, got {}", cfg.n_paths)));
    }
    let (sups, terms) = map_indexed(cfg.n_paths, |i| g.sup_and_terminal(cfg.seed, i)).into_iter().unzip();
    Ok((sups, terms, cfg))
}

fn quantile_series(sups: &[f64], terms: &[f64]) -> Vec<Vec<f64>> {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(sups), sorted(terms));
    let at = |v: &[f64], p: f64| v[((p * v.len() as f64) as usize).min(v.len() - 1)];
    (1..100).map(|k| k as f64 / 100.0).map(|p| vec![p, at(&a, p), at(&b, p)]).collect()
}

fn doob_check(s: &Settings) -> Result<Report> {
    let sigma: f64 = get!(s.sigma);
    let x0: f64 = get!(s.x0);
    let k = sigmas(s)?;
    let (sups, terms, cfg) = gbm_samples(s, sigma, x0)?;
    let d = doob_l1_from_samples(&sups, &terms, x0)?;
    let mut r = Report::default();
    r.bound("doob_l1", "E[sup X]", &d.bound, Provenance::MonteCarloBound);
    let exact = x0 * (gbm_xlogx(sigma, cfg.horizon) + x0.ln());
    r.against("xlogx", "E[X_T log X_T]", &d.xlogx, exact, Provenance::ClosedForm, k);
    r.series("quantiles", vec!["p", "sup", "terminal"], quantile_series(&sups, &terms));
    Ok(r)
}

fn reverse_l1(s: &Settings) -> Result<Report> {
    let sigma: f64 = get!(s.sigma);
    let k = sigmas(s)?;
    let (sups, terms, cfg) = gbm_samples(s, sigma, 1.0)?;
    let b = reverse_l1_check(&sups, &terms, 1.0)?;
    let closed = gbm_xlogx_plus(sigma, cfg.horizon);
    let quad = gbm_xlogx_plus_quadrature(sigma, cfg.horizon)?;
    let mut r = Report::default();
    r.bound("reverse_l1", "E[sup X]", &b, Provenance::MonteCarloBound);
    r.against("xlogx_plus", "1+E[X_T log+ X_T]", &b.rhs, 1.0 + closed, Provenance::ClosedForm, k);
    r.exact("xlogx_plus", "closed_form", closed, quad, Provenance::Quadrature, 1e-8);
    r.series("quantiles", vec!["p", "sup", "terminal"], quantile_series(&sups, &terms));
    Ok(r)
}

fn distribution(s: &Settings) -> Result<Box<dyn QuantileModel>> {
    builtin(&need(&s.dist, "dist")?, s.dist_alpha.unwrap_or(1.5))
}

/// `H_F(t)` in closed form where one is known.
fn hl_closed_form(name: &str, t: f64) -> Option<f64> {
    match name {
        "uniform" => Some(0.5 * (1.0 + t)),
        "exponential" => Some(1.0 - (1.0 - t).ln()),
        _ => None,
    }
}

fn hl(s: &Settings) -> Result<Report> {
    let f = distribution(s)?;
    let name = get!(s.dist);
    let t: f64 = get!(s.t);
    let h = hl_maximal(&*f, t)?;
    let mut r = Report::default();
    let q = format!("H_F(t={t})");
    match hl_closed_form(&name, t) {
        Some(exact) => r.exact("hl_maximal", &q, h, exact, Provenance::ClosedForm, 1e-8),
        None => {
            let exact = f.tail_integral(t)? / (1.0 - t);
            r.exact("hl_maximal", &q, h, exact, Provenance::Quadrature, 1e-8 * exact.abs().max(1.0));
        }
    }
    let limit = hl_maximal(&*f, 1e-12)?;
    r.exact("hl_maximal", "H_F(0+)", limit, f.mean(), Provenance::ClosedForm, 1e-8);
    let stein = stein_check(&*f)?;
    r.value("stein", "h_in_l1", if stein.predicts_h_in_l1 { 1.0 } else { 0.0 });
    r.value("stein", "partial_integral", *stein.partial_integrals.last().expect("ladder is non-empty"));
    let curve = (1..100)
        .map(|k| {
            let t = k as f64 / 100.0;
            hl_maximal(&*f, t).map(|h| vec![t, h, f.quantile(t)])
        })
        .collect::<Result<Vec<_>>>()?;
    r.series("maximal_function", vec!["t", "H_F", "quantile"], curve);
    r.series(
        "stein",
        vec!["level", "partial_integral", "increment"],
        stein
            .partial_integrals
            .iter()
            .zip(&stein.increments)
            .enumerate()
            .map(|(k, (p, d))| vec![k as f64, *p, *d])
            .collect(),
    );
    Ok(r)
}

fn dubins_gilat(s: &Settings) -> Result<Report> {
    let f = distribution(s)?;
    let point: f64 = get!(s.s);
    let grid = TimeGrid::new(1.0, get!(s.n_steps))?;
    let path = dg_path(&*f, point, &grid)?;
    let mut r = Report::default();
    let h = hl_maximal(&*f, point)?;
    r.exact("dubins_gilat", "sup", path.sup, h, Provenance::ClosedForm, 1e-12 * h.abs().max(1.0));
    r.value("dubins_gilat", "closing", path.closing);
    let ts: Vec<f64> = (0..20).map(|k| (k as f64 + 0.5) / 20.0).collect();
    let mut worst = 0.0f64;
    for (i, &t1) in ts.iter().enumerate() {
        for &t2 in &ts[i + 1..] {
            worst = worst.max(dg_martingale_identity(&*f, t1, t2)?.abs());
        }
    }
    r.exact("martingale_identity", "max_residual", worst, 0.0, Provenance::Quadrature, 1e-8);
    r.series("path", vec!["t", "X"], (0..grid.len()).map(|i| vec![grid.node(i), path.path.at(i)]).collect());
    Ok(r)
}

fn stopped_lm(s: &Settings) -> Result<Report> {
    let cfg = mc(s)?;
    let k = sigmas(s)?;
    let grid = cfg.grid()?;
    let c = CSequence::doob_maximal(1.0)?;
    let paths = try_map_indexed(cfg.n_paths, |i| inverse_bessel_path(&grid, 1.0, cfg.seed, i).map(|p| p.summary()))?;
    let levels = sample_levels(&c, cfg.n_paths, derive_seed(cfg.seed, 7));
    let rep = stopped_construction_report(&paths, &levels, &c, 1.0, cfg.horizon)?;
    let mut r = Report::default();
    // The stopped mean converges to 1 only as the horizon grows; reported, not judged.
    r.reference("stopped_mean", "E[M_T]", &rep.stopped_mean, 1.0, Provenance::ClosedForm);
    for row in &rep.rows {
        let se = binomial_stderr(row.horizon_oracle, cfg.n_paths);
        let q = format!("P[sup>{}]", row.n);
        r.compare("tail", &q, &row.empirical, row.horizon_oracle, Provenance::ClosedForm, k, se);
    }
    r.exact("c_sequence", "c_1", c.c(1), (E + 1.0).ln(), Provenance::ClosedForm, 1e-12);
    for (n, sum) in &rep.series {
        r.value("h1_series", &format!("N={n}"), *sum);
    }
    r.exact("h1_series", "divergent", if rep.series_divergent { 1.0 } else { 0.0 }, 1.0, Provenance::ClosedForm, 0.0);
    if rep.capped_paths > 0 {
        r.notes.push(format!("{} paths hit the level cap", rep.capped_paths));
    }
    r.series(
        "tails",
        vec!["n", "empirical", "stderr", "grid_empirical", "oracle", "horizon_oracle"],
        rep.rows
            .iter()
            .map(|row| {
                let se = binomial_stderr(row.horizon_oracle, cfg.n_paths);
                vec![row.n as f64, row.empirical.mean, se, row.grid_empirical, row.oracle, row.horizon_oracle]
            })
            .collect(),
    );
    Ok(r)
}

fn affine_heston(s: &Settings) -> Result<Report> {
    let k = PowerLawKernel::new(get!(s.alpha), get!(s.eta))?;
    let p = AffineVolterraParams::new(k, get!(s.a1), get!(s.b0), get!(s.b1), get!(s.y0))?;
    let s0: f64 = get!(s.s0);
    let cfg = mc(s)?;
    let sig = sigmas(s)?;
    let grid = cfg.grid()?;
    let sim = GenericSimulator::new(p.sv_spec(get!(s.rho), s0)?, grid);
    let nodes = checkpoints(&grid);
    if cfg.n_paths < 2 {
        return Err(Error::Usage(format!("Monte Carlo runs need at least 2 paths, got {}", cfg.n_paths)));
    }
    let rows = try_map_indexed(cfg.n_paths, |i| {
        let path = sim.path(cfg.seed, i)?;
        let mut ys = [0.0; 3];
        for (j, &n) in nodes.iter().enumerate() {
            ys[j] = path.y.at(n);
        }
        Ok::<_, Error>((ys, path.s.terminal()))
    })?;
    let mean = affine_mean_curve(&p, &grid);
    let mut r = Report::default();
    for (j, &n) in nodes.iter().enumerate() {
        let e = MCEstimate::from_samples(&column(&rows, j))?;
        r.against("affine_mean", &format!("t={}", grid.node(n)), &e, mean.at(n), Provenance::LinearSolve, sig);
    }
    let terminal: Vec<f64> = rows.iter().map(|x| x.1).collect();
    r.against("martingale", "E[S_T]", &MCEstimate::from_samples(&terminal)?, s0, Provenance::ClosedForm, sig);
    let b = generic_sup_bound(&sim, &cfg)?;
    r.bound("sup_bound", "first_bound", &b.bound, Provenance::MonteCarloBound);
    r.bound("sup_bound", "doob_bound", &b.doob, Provenance::MonteCarloBound);
    // The noise coefficient depends on the state, so Ỹ ≤ Y need not hold pathwise here.
    r.value("domination", "violations", b.domination_violations as f64);
    if let Some(c) = &b.caveat {
        r.notes.push(c.clone());
    }
    let first = sim.path(cfg.seed, 0)?;
    r.series(
        "mean_curve",
        vec!["t", "mean", "Y_path0", "S_path0"],
        (0..grid.len()).map(|i| vec![grid.node(i), mean.at(i), first.y.at(i), first.s.at(i)]).collect(),
    );
    Ok(r)
}
