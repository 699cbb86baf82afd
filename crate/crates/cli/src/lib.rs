//! Batch front end of the workbench.
//!
//! [`run`] parses a command line, loads the JSON config, dispatches to the
//! library and writes a JSON report with sorted keys. Exit codes: `0`
//! success, `2` malformed input or violated precondition, `3` exhausted
//! resource cap, `1` internal error or a failed `verify`.
//!
//! ```
//! let dir = tempfile::tempdir().unwrap();
//! let config = dir.path().join("z.json");
//! std::fs::write(&config, r#"{"group": {"kind": "fg-abelian", "torsion": [0]}, "task": {"nmax": 20}}"#).unwrap();
//! let out = dir.path().join("report.json");
//! let argv = ["unirep", "probe-amenability", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
//! assert_eq!(unirep_cli::run(argv), unirep_cli::EXIT_OK);
//! assert_eq!(unirep_cli::run(["unirep", "verify", out.to_str().unwrap()]), unirep_cli::EXIT_OK);
//! ```

use std::ffi::OsString;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::Parser;
use unirep::Error;

pub mod args;
pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

use args::{Cli, Command, Common};
use commands::Ctx;
use config::{TargetSpec, WorkbenchConfig};
use report::{Report, VERIFY_TOL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
    Mismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(Error::Resource { .. }) => EXIT_RESOURCE,
            Failure::Core(Error::NoConvergence { .. }) | Failure::Mismatch(_) => EXIT_INTERNAL,
            Failure::Core(_) => EXIT_PRECONDITION,
            Failure::Io(..) => EXIT_PRECONDITION,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(p, e) => format!("{}: {e}", p.display()),
            Failure::Mismatch(m) => m.clone(),
        }
    }
}

/// Runs one command line (including the program name) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            EXIT_INTERNAL
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

/// Reads and validates a config, applying flag overrides to the task block.
pub fn load_config(text: &str) -> unirep::Result<WorkbenchConfig> {
    unirep::config::from_json(text)
}

fn context(common: &Common) -> Result<Ctx, Failure> {
    let mut cfg = load_config(&read(&common.config)?)?;
    cfg.task.apply_flags(common);
    Ok(Ctx::new(cfg)?)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let (common, report) = match cli.command {
        Command::ProbeAmenability(c) => (c.clone(), commands::probe_amenability(context(&c)?)?),
        Command::Contain(a) => {
            let target = match &a.target {
                Some(p) => Some(
                    unirep::config::from_json::<TargetSpec>(&read(p)?).map_err(|e| relabel(e, p))?,
                ),
                None => None,
            };
            (a.common.clone(), commands::contain(context(&a.common)?, target)?)
        }
        Command::FolnerWitness(c) => (c.clone(), commands::folner(context(&c)?)?),
        Command::Transfer(c) => (c.clone(), commands::transfer(context(&c)?)?),
        Command::Nondividing(c) => (c.clone(), commands::nondividing_cmd(context(&c)?)?),
        Command::CanonicalBase(c) => (c.clone(), commands::canonical_base_cmd(context(&c)?)?),
        Command::Superstable(c) => (c.clone(), commands::superstable(context(&c)?)?),
        Command::Amalgamate(c) => (c.clone(), commands::amalgamate_cmd(context(&c)?)?),
        Command::Verify(v) => return verify_file(&v.report, v.tol),
    };
    emit(&common, &report)
}

/// Prefixes a parse error path with the file it came from.
fn relabel(e: Error, file: &Path) -> Error {
    match e {
        Error::Parse { path, message } => Error::Parse {
            path: format!("{}: {path}", file.display()),
            message,
        },
        other => other,
    }
}

/// The report text: pretty JSON with sorted keys and a trailing newline.
pub fn render(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(&report.to_value()).expect("report serializes");
    s.push('\n');
    s
}

fn emit(common: &Common, report: &Report) -> Result<(), Failure> {
    if let Some(path) = &common.csv {
        let rows = report.csv.as_ref().ok_or_else(|| {
            Failure::Core(Error::Precondition(format!("`{}` has no trace to export", report.command)))
        })?;
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_failure(path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| csv_failure(path, e))?;
        }
        w.flush().map_err(|e| Failure::Io(path.clone(), e))?;
    }
    let text = render(report);
    match &common.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::Io(path.clone(), e))?;
            println!("{}: {} = {:e}", report.command, report.headline.0, report.headline.1);
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn csv_failure(path: &Path, e: csv::Error) -> Failure {
    Failure::Io(path.to_path_buf(), std::io::Error::other(e.to_string()))
}

fn verify_file(path: &Path, tol: f64) -> Result<(), Failure> {
    let report: serde_json::Value = serde_json::from_str(&read(path)?).map_err(|e| {
        Failure::Core(Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    })?;
    let checks = verify::recompute(&report)?;
    let mut failed = Vec::new();
    for c in &checks {
        let ok = c.deviation() <= tol;
        println!(
            "{} {}: reported {:e}, recomputed {:e}",
            if ok { "ok  " } else { "FAIL" },
            c.name,
            c.reported,
            c.recomputed
        );
        if !ok {
            failed.push(c.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Mismatch(format!(
            "recomputed values differ by more than {tol:e}: {}",
            failed.join(", ")
        )))
    }
}

/// Recomputes a rendered report and returns the largest deviation over its checks.
pub fn verify_report(text: &str) -> unirep::Result<f64> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "$".into(),
        message: e.to_string(),
    })?;
    Ok(verify::recompute(&v)?.iter().map(|c| c.deviation()).fold(0.0, f64::max))
}

#[doc(hidden)]
pub const DEFAULT_VERIFY_TOL: f64 = VERIFY_TOL;
