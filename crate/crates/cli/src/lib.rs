//! Command-line driver: reads scenario files, dispatches to the solver,
//! oracles and checks, and writes JSON/CSV results plus a run record.
//!
//! Exit codes: 0 ok, 1 infeasible or failed check on valid inputs,
//! 2 invalid inputs, 3 internal error.

pub mod args;
mod commands;
pub mod io;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use args::{Command, Format, OracleCommand, Output};
use io::{CliError, ErrorItem, OutDir};

pub use commands::SweepSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infeasible,
    CheckFailed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Infeasible | Status::CheckFailed => 1,
        }
    }
}

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Reproducibility envelope written as `run.json` next to the outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the scenario's canonical JSON (keys sorted, compact).
    pub scenario_sha256: Option<String>,
    pub config: Option<serde_json::Value>,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

pub struct Run {
    pub record: RunRecord,
    pub out: OutDir,
    pub format: Format,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evaluate(_) => "evaluate",
            Command::Solve(a) if a.sweep.is_some() => "solve --sweep",
            Command::Solve(_) => "solve",
            Command::Sweep(_) => "sweep",
            Command::Oracle(OracleCommand::Example1(_)) => "oracle example1",
            Command::Oracle(OracleCommand::Brute(_)) => "oracle brute",
            Command::DppCheck(_) => "dpp-check",
        }
    }

    fn output(&self) -> &Output {
        match self {
            Command::Evaluate(a) => &a.output,
            Command::Solve(a) => &a.output,
            Command::Sweep(a) => &a.output,
            Command::Oracle(OracleCommand::Example1(a)) => &a.output,
            Command::Oracle(OracleCommand::Brute(a)) => &a.output,
            Command::DppCheck(a) => &a.output,
        }
    }
}

fn dispatch(command: &Command, run: &mut Run) -> Result<Status, CliError> {
    match command {
        Command::Evaluate(a) => commands::evaluate(run, a),
        Command::Solve(a) => match &a.sweep {
            Some(spec) => commands::sweep(run, &a.scenario, spec, &a.solver),
            None => commands::solve_cmd(run, &a.scenario, &a.solver),
        },
        Command::Sweep(a) => commands::sweep(run, &a.scenario, &a.sweep, &a.solver),
        Command::Oracle(OracleCommand::Example1(a)) => commands::example1(run, a),
        Command::Oracle(OracleCommand::Brute(a)) => commands::brute(run, a),
        Command::DppCheck(a) => commands::dpp_check(run, a),
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    errors: &'a [ErrorItem],
}

fn report(errors: &[ErrorItem]) {
    let text = serde_json::to_string_pretty(&ErrorReport { errors }).unwrap_or_else(|_| format!("{errors:?}"));
    eprintln!("{text}");
}

fn internal(message: String) -> i32 {
    report(&[ErrorItem::new("internal", "", message)]);
    EXIT_INTERNAL
}

/// Runs one command and returns the process exit code. Errors are printed
/// to stderr as `{"errors": [...]}`; invalid-input errors are also saved as
/// `errors.json` in the output directory.
pub fn execute(command: &Command) -> i32 {
    let started = Instant::now();
    let output = command.output();
    let out = match OutDir::create(&output.out) {
        Ok(out) => out,
        Err(e) => return internal(format!("{e:#}")),
    };
    let mut run = Run {
        record: RunRecord {
            version: env!("CARGO_PKG_VERSION"),
            command: command.name().to_string(),
            scenario_sha256: None,
            config: None,
            seed: None,
            outputs: Vec::new(),
            wall_time_s: 0.0,
        },
        out,
        format: output.format,
    };
    let result = catch_unwind(AssertUnwindSafe(|| dispatch(command, &mut run)));
    match result {
        Ok(Ok(status)) => {
            run.record.outputs = run.out.written().to_vec();
            run.record.wall_time_s = started.elapsed().as_secs_f64();
            let record = run.record.clone();
            if let Err(e) = run.out.write_json("run.json", &record) {
                return internal(format!("{e:#}"));
            }
            status.code()
        }
        Ok(Err(CliError::Invalid(errors))) => {
            report(&errors);
            if let Err(e) = run.out.write_json("errors.json", &ErrorReport { errors: &errors }) {
                log::warn!("could not save errors.json: {e:#}");
            }
            EXIT_INVALID
        }
        Ok(Err(CliError::Internal(e))) => internal(format!("{e:#}")),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            internal(msg)
        }
    }
}
