use std::path::Path;

use serde::Deserialize;

use crate::CliError;

macro_rules! settings {
    ($($(#[$meta:meta])* $name:ident: $ty:ty,)*) => {
        /// Experiment settings. Every field is both a config key and a flag.
        #[derive(Debug, Clone, Default, Deserialize, clap::Args)]
        #[serde(deny_unknown_fields)]
        pub struct Settings {
            $($(#[$meta])* pub $name: Option<$ty>,)*
        }

        impl Settings {
            /// Fields set in `other` replace ours.
            pub fn overlay(&mut self, other: &Settings) {
                $(if other.$name.is_some() {
                    self.$name = other.$name.clone();
                })*
            }

            pub fn keys(&self) -> Vec<&'static str> {
                let mut keys = Vec::new();
                $(if self.$name.is_some() {
                    keys.push(stringify!($name));
                })*
                keys
            }

            /// The settings as a flat config file.
            pub fn to_toml(&self) -> String {
                let mut out = String::new();
                $(if let Some(v) = &self.$name {
                    let value = toml::Value::try_from(v).expect("settings are plain values");
                    out.push_str(&format!("{} = {}\n", stringify!($name), value));
                })*
                out
            }
        }
    };
}

settings! {
    #[arg(skip)]
    command: String,
    /// Kernel exponent.
    #[arg(long)]
    alpha: f64,
    /// Kernel scale.
    #[arg(long)]
    eta: f64,
    /// Correlation between price and variance noise.
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    /// Initial (flat forward) variance.
    #[arg(long)]
    v0: f64,
    /// Initial price.
    #[arg(long)]
    s0: f64,
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    n_steps: usize,
    #[arg(long)]
    n_paths: u64,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out_dir: String,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: usize,
    /// Standard errors allowed between an estimate and its oracle.
    #[arg(long)]
    sigmas: f64,
    /// GBM volatility.
    #[arg(long)]
    sigma: f64,
    /// GBM starting value.
    #[arg(long)]
    x0: f64,
    /// Distribution: uniform, exponential or pareto_tail.
    #[arg(long)]
    dist: String,
    /// Tail exponent of pareto_tail.
    #[arg(long)]
    dist_alpha: f64,
    /// Probability level of the maximal function.
    #[arg(long)]
    t: f64,
    /// Sample point of the Dubins-Gilat path.
    #[arg(long)]
    s: f64,
    #[arg(long)]
    a1: f64,
    #[arg(long)]
    b0: f64,
    #[arg(long, allow_hyphen_values = true)]
    b1: f64,
    #[arg(long)]
    y0: f64,
    /// Largest continuity offset.
    #[arg(long)]
    eps_max: f64,
    /// Number of halvings of the continuity offset.
    #[arg(long)]
    eps_levels: usize,
    /// Also run on the doubled grid.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    refine: bool,
    /// Also run the mismatched-law negative control.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    control: bool,
    /// Significance level of the law comparison.
    #[arg(long)]
    ks_level: f64,
}

pub const COMMANDS: [&str; 10] = [
    "kernel-check",
    "simulate",
    "sup-bound",
    "measure-check",
    "doob-check",
    "reverse-l1",
    "hl-maximal",
    "dubins-gilat",
    "stopped-lm",
    "affine-heston",
];

const BERGOMI: [&str; 9] = ["alpha", "eta", "rho", "v0", "s0", "horizon", "n_steps", "n_paths", "seed"];

fn allowed(command: &str) -> Vec<&'static str> {
    let mut keys = vec!["command", "out_dir", "workers"];
    match command {
        "kernel-check" => keys.extend(["alpha", "eta", "horizon", "n_steps", "eps_max", "eps_levels"]),
        "simulate" => keys.extend(BERGOMI.iter().chain(&["sigmas"])),
        "sup-bound" => keys.extend(BERGOMI.iter().chain(&["refine"])),
        "measure-check" => keys.extend(BERGOMI.iter().chain(&["control", "ks_level"])),
        "doob-check" => keys.extend(["sigma", "x0", "horizon", "n_steps", "n_paths", "seed", "sigmas"]),
        "reverse-l1" => keys.extend(["sigma", "horizon", "n_steps", "n_paths", "seed", "sigmas"]),
        "hl-maximal" => keys.extend(["dist", "dist_alpha", "t"]),
        "dubins-gilat" => keys.extend(["dist", "dist_alpha", "s", "n_steps"]),
        "stopped-lm" => keys.extend(["horizon", "n_steps", "n_paths", "seed", "sigmas"]),
        "affine-heston" => keys.extend([
            "alpha", "eta", "a1", "b0", "b1", "y0", "rho", "s0", "horizon", "n_steps", "n_paths", "seed", "sigmas",
        ]),
        _ => {}
    }
    keys
}

fn defaults(command: &str) -> Settings {
    let mut s = Settings {
        command: Some(command.to_string()),
        out_dir: Some("volsup-out".into()),
        workers: Some(0),
        ..Settings::default()
    };
    let monte_carlo = |s: &mut Settings, n_steps: usize| {
        s.horizon = Some(1.0);
        s.n_steps = Some(n_steps);
        s.n_paths = Some(10_000);
        s.seed = Some(1);
    };
    let bergomi = |s: &mut Settings, n_steps: usize| {
        monte_carlo(s, n_steps);
        s.alpha = Some(0.7);
        s.eta = Some(1.5);
        s.rho = Some(-0.7);
        s.v0 = Some(0.04);
        s.s0 = Some(1.0);
    };
    match command {
        "kernel-check" => {
            s.alpha = Some(0.7);
            s.eta = Some(1.5);
            s.horizon = Some(1.0);
            s.n_steps = Some(256);
            s.eps_max = Some(0.1);
            s.eps_levels = Some(8);
        }
        "simulate" => {
            bergomi(&mut s, 256);
            s.sigmas = Some(3.0);
        }
        "sup-bound" => {
            bergomi(&mut s, 512);
            s.refine = Some(false);
        }
        "measure-check" => {
            bergomi(&mut s, 64);
            s.control = Some(false);
            s.ks_level = Some(0.01);
        }
        "doob-check" | "reverse-l1" => {
            monte_carlo(&mut s, 512);
            s.sigmas = Some(3.0);
            if command == "doob-check" {
                s.sigma = Some(0.2);
                s.x0 = Some(1.0);
            } else {
                s.sigma = Some(1.0);
            }
        }
        "hl-maximal" | "dubins-gilat" => {
            s.dist = Some("uniform".into());
            s.dist_alpha = Some(1.5);
            if command == "hl-maximal" {
                s.t = Some(0.5);
            } else {
                s.s = Some(0.5);
                s.n_steps = Some(64);
            }
        }
        "stopped-lm" => {
            monte_carlo(&mut s, 64);
            s.horizon = Some(1e6);
            s.sigmas = Some(3.0);
        }
        "affine-heston" => {
            monte_carlo(&mut s, 256);
            s.sigmas = Some(3.0);
            s.alpha = Some(0.6);
            s.eta = Some(1.0);
            s.a1 = Some(0.09);
            s.b0 = Some(0.012);
            s.b1 = Some(-0.3);
            s.y0 = Some(0.02);
            s.rho = Some(-0.7);
            s.s0 = Some(1.0);
        }
        _ => {}
    }
    s
}

pub fn load(path: &Path) -> Result<Settings, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("invalid config {}: {}", path.display(), e.message())))
}

/// Defaults, then the config file, then `VOLSUP_SEED`, then flags.
pub fn resolve(
    command: Option<&str>,
    file: Option<Settings>,
    env_seed: Option<String>,
    flags: &Settings,
) -> Result<Settings, CliError> {
    let from_file = file.as_ref().and_then(|f| f.command.clone());
    let command = match (command, from_file.as_deref()) {
        (Some(c), Some(f)) if c != f => {
            return Err(CliError::config(format!("config is for '{f}' but the command is '{c}'")));
        }
        (Some(c), _) | (None, Some(c)) => c.to_string(),
        (None, None) => return Err(CliError::config("config has no 'command' key")),
    };
    if !COMMANDS.contains(&command.as_str()) {
        return Err(CliError::config(format!("unknown command '{command}' (expected one of {})", COMMANDS.join(", "))));
    }
    let keep = allowed(&command);
    let mut out = defaults(&command);
    let check = |s: &Settings, origin: &str| -> Result<(), CliError> {
        match s.keys().into_iter().find(|k| !keep.contains(k)) {
            Some(key) => Err(CliError::config(format!("{origin} sets '{key}', which does not apply to {command}"))),
            None => Ok(()),
        }
    };
    if let Some(f) = &file {
        check(f, "config")?;
        out.overlay(f);
    }
    if let Some(seed) = env_seed {
        let seed = seed
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::config(format!("VOLSUP_SEED must be an unsigned integer, got '{seed}'")))?;
        if keep.contains(&"seed") {
            out.seed = Some(seed);
        }
    }
    check(flags, "command line")?;
    out.overlay(flags);
    out.command = Some(command);
    Ok(out)
}
