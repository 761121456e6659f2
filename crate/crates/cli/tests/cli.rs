use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn volsup(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volsup"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("VOLSUP_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Rows of results.csv as `(check/quantity, fields)`.
fn rows(dir: &Path) -> Vec<(String, Vec<String>)> {
    let text = read(dir, "results.csv");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("check,quantity,value,stderr,n,oracle,oracle_provenance,verdict"));
    lines
        .map(|l| {
            let f: Vec<String> = l.split(',').map(str::to_string).collect();
            assert_eq!(f.len(), 8, "{l}");
            (format!("{}/{}", f[0], f[1]), f)
        })
        .collect()
}

fn row(dir: &Path, key: &str) -> Vec<String> {
    rows(dir).into_iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no row {key}")).1
}

fn assert_artifacts(dir: &Path) {
    for name in ["manifest.txt", "results.csv", "config.toml"] {
        assert!(dir.join(name).is_file(), "{name}");
    }
    let series: Vec<PathBuf> = fs::read_dir(dir.join("series")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!series.is_empty());
    assert!(series.iter().all(|p| p.extension().is_some_and(|e| e == "dat")));
    for (_, f) in rows(dir) {
        if !f[5].is_empty() {
            assert!(!f[6].is_empty(), "oracle without provenance: {f:?}");
        }
    }
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn kernel_check_fits_the_exponent() {
    let tmp = TempDir::new().unwrap();
    let o = volsup(&["kernel-check", "--alpha", "0.7", "--eta", "1.5"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_artifacts(tmp.path());
    let g: f64 = row(tmp.path(), "continuity/gamma_hat")[2].parse().unwrap();
    assert!((g - 0.7).abs() < 0.02);
    assert!(stdout(&o).contains("gamma_hat"));
}

#[test]
fn simulate_rejects_positive_correlation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "command = \"simulate\"\nrho = 0.3\n");
    let out = tmp.path().join("out");
    let o = volsup(&["run", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rho must be ≤ 0"), "{}", stderr(&o));
    let record = read(&out, "error.txt");
    assert!(record.contains("exit_code = 1") && record.contains("rho must be ≤ 0"));

    let o = volsup(&["simulate", "--n-paths", "400", "--n-steps", "16"], &out);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_artifacts(&out);
}

#[test]
fn sup_bound_from_config_holds() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "command = \"sup-bound\"\nalpha = 0.7\neta = 1.5\nrho = -0.7\nv0 = 0.04\nn_steps = 64\nn_paths = 2000\nseed = 4\n",
    );
    let out = tmp.path().join("out");
    let o = volsup(&["run", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_artifacts(&out);
    let r = row(&out, "sup_bound/first_bound");
    assert_eq!((r[6].as_str(), r[7].as_str()), ("mc-bound", "holds"));

    // The echoed config reproduces the results bit for bit.
    let again = tmp.path().join("again");
    let echo = out.join("config.toml");
    let o = volsup(&["run", echo.to_str().unwrap()], &again);
    assert_eq!(code(&o), 0);
    assert_eq!(read(&out, "results.csv"), read(&again, "results.csv"));
    let manifest = read(&out, "manifest.txt");
    assert!(manifest.contains("seed = 4") && manifest.contains("\"sup_bound/first_bound\" = \"holds\""));
}

#[test]
fn measure_check_is_worker_invariant() {
    let tmp = TempDir::new().unwrap();
    let run = |workers: &str, name: &str| {
        let dir = tmp.path().join(name);
        let args = ["measure-check", "--n-paths", "1500", "--n-steps", "16", "--control", "--workers", workers];
        let o = volsup(&args, &dir);
        assert_ne!(code(&o), 1, "{}", stderr(&o));
        assert_artifacts(&dir);
        (read(&dir, "results.csv"), fs::read(dir.join("series/ks.dat")).unwrap())
    };
    assert_eq!(run("1", "one"), run("3", "three"));
}

#[test]
fn doob_check_seed_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "command = \"doob-check\"\nseed = 3\nn_paths = 2000\nn_steps = 64\n");
    let run = |env: Option<&str>, extra: &[&str], name: &str| {
        let dir = tmp.path().join(name);
        let mut c = Command::new(env!("CARGO_BIN_EXE_volsup"));
        c.args(["doob-check", "--config", cfg.to_str().unwrap()]).args(extra).arg("--out-dir").arg(&dir);
        match env {
            Some(v) => c.env("VOLSUP_SEED", v),
            None => c.env_remove("VOLSUP_SEED"),
        };
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read(&dir, "manifest.txt")
    };
    assert!(run(None, &[], "file").contains("seed = 3\n"));
    assert!(run(Some("5"), &[], "env").contains("seed = 5\n"));
    assert!(run(Some("5"), &["--seed", "9"], "flag").contains("seed = 9\n"));
    let text = run(None, &[], "again");
    assert_eq!(text.lines().filter(|l| l.starts_with("seed")).count(), 2);
}

#[test]
fn reverse_l1_holds() {
    let tmp = TempDir::new().unwrap();
    let o = volsup(&["reverse-l1", "--n-paths", "3000", "--n-steps", "64"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_artifacts(tmp.path());
    assert_eq!(row(tmp.path(), "reverse_l1/E[sup X]")[7], "holds");
    assert_eq!(row(tmp.path(), "xlogx_plus/closed_form")[6], "quadrature");
}

#[test]
fn hl_maximal_prints_closed_form() {
    let tmp = TempDir::new().unwrap();
    let o = volsup(&["hl-maximal", "--dist", "uniform", "--t", "0.5"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("H_F(t=0.5): 0.75 "), "{}", stdout(&o));
    assert_artifacts(tmp.path());
    let r = row(tmp.path(), "hl_maximal/H_F(t=0.5)");
    assert!((r[2].parse::<f64>().unwrap() - 0.75).abs() <= 1e-12);

    let o = volsup(&["hl-maximal", "--dist", "cauchy"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown distribution"));
}

#[test]
fn dubins_gilat_config_errors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = volsup(&["dubins-gilat", "--dist", "exponential", "--s", "0.3"], &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_artifacts(&out);

    let o = volsup(&["run", tmp.path().join("missing.toml").to_str().unwrap()], &out);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cannot read config"));

    let cfg = write_config(tmp.path(), "command = \"dubins-gilat\"\nsigma = 0.3\n");
    let o = volsup(&["run", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("'sigma'"));

    let cfg = write_config(tmp.path(), "command = \"dubins-gilat\"\nsmoothness = 2\n");
    let o = volsup(&["run", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("smoothness"), "{}", stderr(&o));
    assert!(read(&out, "error.txt").contains("kind = config"));
}

#[test]
fn stopped_lm_tail_table() {
    let tmp = TempDir::new().unwrap();
    let o = volsup(&["stopped-lm", "--n-paths", "4000", "--seed", "7"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_artifacts(tmp.path());
    let tails: Vec<_> = rows(tmp.path()).into_iter().filter(|(k, _)| k.starts_with("tail/")).collect();
    assert_eq!(tails.len(), 20);
    assert!(tails.iter().all(|(_, f)| !f[5].is_empty() && f[6] == "closed-form"));
    assert_eq!(row(tmp.path(), "stopped_mean/E[M_T]")[7], "diagnostic");
    let table = read(tmp.path(), "series/tails.dat");
    assert!(table.starts_with("# n empirical stderr grid_empirical oracle horizon_oracle\n"));
    assert_eq!(table.lines().count(), 21);
}

#[test]
fn affine_heston_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let o = volsup(&["affine-heston", "--n-paths", "2000", "--n-steps", "64"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_artifacts(tmp.path());
    assert_eq!(row(tmp.path(), "affine_mean/t=1")[6], "linear-volterra-solve");

    let out = tmp.path().join("overflow");
    let args = ["affine-heston", "--a1", "1e308", "--y0", "1e10", "--n-paths", "20", "--n-steps", "8"];
    let o = volsup(&args, &out);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(read(&out, "error.txt").contains("kind = numeric"));
}

#[test]
fn violated_verdict_exits_two() {
    let tmp = TempDir::new().unwrap();
    // Without correlation the negative control has nothing to detect.
    let args = ["measure-check", "--rho", "0", "--control", "--n-paths", "1500", "--n-steps", "16"];
    let o = volsup(&args, tmp.path());
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    assert_eq!(row(tmp.path(), "control/ks_p_value")[7], "violated");
    assert_eq!(row(tmp.path(), "share_measure/ks_p_value")[7], "holds");
    assert!(read(tmp.path(), "manifest.txt").contains("\"control/ks_p_value\" = \"violated\""));

    // Overflowing parameters are a numeric failure, not a verdict.
    let o = volsup(&["affine-heston", "--b0", "1e300", "--n-paths", "20", "--n-steps", "8"], tmp.path());
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stderr(&o).contains("not finite"));
}
