use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use volsup_core::estimators::{BoundReport, Verdict};
use volsup_core::MCEstimate;

use crate::CliError;

pub const CSV_HEADER: &str = "check,quantity,value,stderr,n,oracle,oracle_provenance,verdict";

/// Where an oracle value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    MonteCarloBound,
    LinearSolve,
    RefinementMc,
    Bootstrap,
    None,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Quadrature => "quadrature",
            Provenance::MonteCarloBound => "mc-bound",
            Provenance::LinearSolve => "linear-volterra-solve",
            Provenance::RefinementMc => "refinement-mc",
            Provenance::Bootstrap => "bootstrap",
            Provenance::None => "",
        }
    }
}

/// Row verdicts. Only `Violated` fails a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowVerdict {
    Bound(Verdict),
    Diagnostic,
}

impl RowVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowVerdict::Bound(v) => v.as_str(),
            RowVerdict::Diagnostic => "diagnostic",
        }
    }

    pub fn pass_if(ok: bool) -> Self {
        RowVerdict::Bound(if ok { Verdict::Holds } else { Verdict::Violated })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub check: String,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n: Option<u64>,
    pub oracle: Option<f64>,
    pub provenance: Provenance,
    pub verdict: RowVerdict,
}

/// Name, column labels and rows of one series file.
pub type Series = (String, Vec<&'static str>, Vec<Vec<f64>>);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<Row>,
    /// `series/<name>.dat`: a header comment and whitespace-separated columns.
    pub series: Vec<Series>,
    pub notes: Vec<String>,
}

impl Report {
    /// A row with no oracle.
    pub fn value(&mut self, check: &str, quantity: &str, value: f64) {
        self.rows.push(Row {
            check: check.into(),
            quantity: quantity.into(),
            value,
            stderr: None,
            n: None,
            oracle: None,
            provenance: Provenance::None,
            verdict: RowVerdict::Diagnostic,
        });
    }

    /// A Monte Carlo estimate shown next to an oracle it is not judged against.
    pub fn reference(&mut self, check: &str, quantity: &str, e: &MCEstimate, oracle: f64, p: Provenance) {
        self.rows.push(Row {
            check: check.into(),
            quantity: quantity.into(),
            value: e.mean,
            stderr: Some(e.stderr),
            n: Some(e.n),
            oracle: Some(oracle),
            provenance: p,
            verdict: RowVerdict::Diagnostic,
        });
    }

    /// A Monte Carlo estimate judged against an oracle within `sigmas` standard errors.
    pub fn against(&mut self, check: &str, quantity: &str, e: &MCEstimate, oracle: f64, p: Provenance, sigmas: f64) {
        self.compare(check, quantity, e, oracle, p, sigmas, e.stderr);
    }

    /// As [`Report::against`] with an explicit standard error.
    #[allow(clippy::too_many_arguments)]
    pub fn compare(
        &mut self,
        check: &str,
        quantity: &str,
        e: &MCEstimate,
        oracle: f64,
        p: Provenance,
        sigmas: f64,
        stderr: f64,
    ) {
        let ok = (e.mean - oracle).abs() <= sigmas * stderr;
        self.rows.push(Row {
            check: check.into(),
            quantity: quantity.into(),
            value: e.mean,
            stderr: Some(stderr),
            n: Some(e.n),
            oracle: Some(oracle),
            provenance: p,
            verdict: RowVerdict::pass_if(ok),
        });
    }

    /// A deterministic value judged against an oracle with tolerance `tol`.
    pub fn exact(&mut self, check: &str, quantity: &str, value: f64, oracle: f64, p: Provenance, tol: f64) {
        self.rows.push(Row {
            check: check.into(),
            quantity: quantity.into(),
            value,
            stderr: None,
            n: None,
            oracle: Some(oracle),
            provenance: p,
            verdict: RowVerdict::pass_if((value - oracle).abs() <= tol),
        });
    }

    /// A bound: value is the left side, oracle the right side.
    pub fn bound(&mut self, check: &str, quantity: &str, b: &BoundReport, p: Provenance) {
        let stderr = b.lhs.stderr.hypot(b.rhs.stderr);
        self.rows.push(Row {
            check: check.into(),
            quantity: quantity.into(),
            value: b.lhs.mean,
            stderr: Some(stderr),
            n: Some(b.lhs.n),
            oracle: Some(b.rhs.mean),
            provenance: p,
            verdict: RowVerdict::Bound(b.verdict),
        });
    }

    pub fn series(&mut self, name: &str, columns: Vec<&'static str>, rows: Vec<Vec<f64>>) {
        self.series.push((name.into(), columns, rows));
    }

    /// The first row carrying a NaN or infinite number.
    pub fn non_finite(&self) -> Option<&Row> {
        self.rows.iter().find(|r| {
            let opt = |v: Option<f64>| v.is_some_and(|x| !x.is_finite());
            !r.value.is_finite() || opt(r.stderr) || opt(r.oracle)
        })
    }

    pub fn violated(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == RowVerdict::Bound(Verdict::Violated))
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.check,
                r.quantity,
                num(r.value),
                opt(r.stderr),
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.oracle),
                r.provenance.as_str(),
                r.verdict.as_str()
            );
        }
        out
    }

    /// One line per row for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = write!(out, "{}/{}: {}", r.check, r.quantity, short(r.value));
            if let Some(se) = r.stderr {
                let _ = write!(out, " ± {}", short(se));
            }
            if let Some(o) = r.oracle {
                let _ = write!(out, " (oracle {} {})", short(o), r.provenance.as_str());
            }
            let _ = writeln!(out, " [{}]", r.verdict.as_str());
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let series_dir = dir.join("series");
        fs::create_dir_all(&series_dir).map_err(|e| CliError::io(&series_dir, e))?;
        write_file(&dir.join("results.csv"), &self.csv())?;
        for (name, columns, rows) in &self.series {
            let mut text = format!("# {}\n", columns.join(" "));
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
                text.push_str(&cells.join(" "));
                text.push('\n');
            }
            write_file(&series_dir.join(format!("{name}.dat")), &text)?;
        }
        Ok(())
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// At most 10 significant digits, trailing zeros dropped.
pub fn short(v: f64) -> String {
    if !v.is_finite() || v == 0.0 {
        return format!("{v}");
    }
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    let exp = v.abs().log10().floor() as i32;
    if !(-4..=14).contains(&exp) {
        let s = format!("{v:.9e}");
        let (mantissa, e) = s.split_once('e').expect("exponent format");
        return format!("{}e{e}", trim(mantissa));
    }
    trim(&format!("{v:.*}", (9 - exp).max(0) as usize))
}
