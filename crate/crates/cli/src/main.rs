//! `volsup`: run supremum-integrability experiments from flags or a config file.

mod commands;
mod config;
mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::Settings;
use report::{write_file, Report};

#[derive(Parser)]
#[command(name = "volsup", version = VERSION, about = "Rough-volatility supremum experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Args {
    /// Config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the `command` key of a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Kernel weights and the continuity modulus.
    KernelCheck(Args),
    /// Rough Bergomi moments, domination and martingale checks.
    Simulate(Args),
    /// Supremum bound for rough Bergomi.
    SupBound(Args),
    /// Share-measure law comparison.
    MeasureCheck(Args),
    /// Doob's L1 inequality for GBM.
    DoobCheck(Args),
    /// Reverse L1 inequality for GBM.
    ReverseL1(Args),
    /// Maximal function of a distribution and Stein's criterion.
    HlMaximal(Args),
    /// Dubins-Gilat martingale path and identity.
    DubinsGilat(Args),
    /// Stopped inverse Bessel construction.
    StoppedLm(Args),
    /// Affine Volterra (rough Heston type) model.
    AffineHeston(Args),
}

const VERSION: &str = match option_env!("VOLSUP_GIT_DESCRIBE") {
    Some(v) => v,
    None => env!("CARGO_PKG_VERSION"),
};

/// A failed run: what went wrong and the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: "config", message: message.into(), code: 1 }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError { kind: "io", message: format!("{}: {e}", path.display()), code: 1 }
    }

    fn record(&self) -> String {
        format!("kind = {}\nexit_code = {}\nmessage = {:?}\n", self.kind, self.code, self.message)
    }
}

impl From<volsup_core::Error> for CliError {
    fn from(e: volsup_core::Error) -> Self {
        let code = if matches!(e, volsup_core::Error::Numeric(_)) { 3 } else { 1 };
        CliError { kind: e.kind(), message: e.to_string(), code }
    }
}

fn split(command: Command) -> (Option<&'static str>, Option<PathBuf>, Settings) {
    let (name, args) = match command {
        Command::Run { config, settings } => return (None, Some(config), settings),
        Command::KernelCheck(a) => ("kernel-check", a),
        Command::Simulate(a) => ("simulate", a),
        Command::SupBound(a) => ("sup-bound", a),
        Command::MeasureCheck(a) => ("measure-check", a),
        Command::DoobCheck(a) => ("doob-check", a),
        Command::ReverseL1(a) => ("reverse-l1", a),
        Command::HlMaximal(a) => ("hl-maximal", a),
        Command::DubinsGilat(a) => ("dubins-gilat", a),
        Command::StoppedLm(a) => ("stopped-lm", a),
        Command::AffineHeston(a) => ("affine-heston", a),
    };
    (Some(name), args.config, args.settings)
}

fn manifest(settings: &Settings, report: &Report, seconds: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "version = {VERSION:?}");
    let _ = writeln!(out, "command = {:?}", settings.command.as_deref().unwrap_or_default());
    if let Some(seed) = settings.seed {
        let _ = writeln!(out, "seed = {seed}");
    }
    let _ = writeln!(out, "workers = {}", settings.workers.unwrap_or(0));
    let _ = writeln!(out, "wall_clock_seconds = {seconds:.3}");
    out.push_str("\n[config]\n");
    out.push_str(&settings.to_toml());
    out.push_str("\n[verdicts]\n");
    for r in &report.rows {
        let _ = writeln!(out, "\"{}/{}\" = {:?}", r.check, r.quantity, r.verdict.as_str());
    }
    out
}

fn execute(command: Command, out_dir: &mut Option<PathBuf>) -> Result<bool, CliError> {
    let (name, path, flags) = split(command);
    *out_dir = flags.out_dir.clone().map(PathBuf::from);
    let file = path.as_deref().map(config::load).transpose()?;
    if out_dir.is_none() {
        *out_dir = file.as_ref().and_then(|f| f.out_dir.clone()).map(PathBuf::from);
    }
    let settings = config::resolve(name, file, std::env::var("VOLSUP_SEED").ok(), &flags)?;
    let dir = PathBuf::from(settings.out_dir.clone().unwrap_or_default());
    *out_dir = Some(dir.clone());

    let start = Instant::now();
    let report = volsup_core::parallel::with_workers(settings.workers.unwrap_or(0), || commands::run(&settings))??;
    let seconds = start.elapsed().as_secs_f64();

    report.write(&dir)?;
    write_file(&dir.join("config.toml"), &settings.to_toml())?;
    write_file(&dir.join("manifest.txt"), &manifest(&settings, &report, seconds))?;
    print!("{}", report.summary());
    println!("results written to {}", dir.display());
    Ok(report.violated())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let mut out_dir = None;
    match execute(cli.command, &mut out_dir) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("a verdict was violated");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error ({}): {}", e.kind, e.message);
            if let Some(dir) = out_dir {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.txt"), e.record());
                }
            }
            ExitCode::from(e.code)
        }
    }
}
