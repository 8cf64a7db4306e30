//! The commands behind the `miniver` binary. Each returns the text to print
//! and the process exit code, so they can be exercised without spawning.

mod matrix;
mod report;

use std::fmt::Write;
use std::path::Path;
use std::str::FromStr;

use crate::callgraph::{build_call_graph, check_termination, to_dot, to_text, Mode, Policy};
use crate::frontend::{parse, typecheck, TypedProgram};
use crate::runtime::{erase, eval, Fuel, Outcome, Value};
use crate::solver::{is_valid, Verdict as SolverVerdict};
use crate::vcgen::{vcs_for_program, VerificationCondition};

pub use matrix::{
    cmd_matrix, parse_manifest, run_matrix, ManifestEntry, ManifestError, MatrixCell,
};
pub use report::{
    CallableReport, Reason, ReasonKind, Report, Summary, Verdict, INPUT_PSEUDO_CALLABLE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FUEL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format `{s}` (expected text or json)")),
        }
    }
}

/// What a command prints and how it exits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutput {
    fn input_error(message: impl Into<String>) -> CommandOutput {
        CommandOutput {
            code: EXIT_INPUT,
            stdout: String::new(),
            stderr: message.into() + "\n",
        }
    }
}

/// Parses and typechecks, turning failures into `type_error` reasons.
pub fn load(source: &str, file: &str) -> Result<TypedProgram, Vec<Reason>> {
    let program = parse(source, file).map_err(|e| {
        vec![Reason {
            kind: ReasonKind::TypeError,
            detail: format!("parse error: {}", e.message),
            line: e.span.line,
            col: e.span.col,
        }]
    })?;
    typecheck(&program).map_err(|errs| {
        errs.into_iter()
            .map(|e| Reason {
                kind: ReasonKind::TypeError,
                detail: format!("{}: {}", e.kind, e.message),
                line: e.span.line,
                col: e.span.col,
            })
            .collect()
    })
}

/// Full verification of a typechecked program.
pub fn verify_program(
    tp: &TypedProgram,
    file: &str,
    mode: Mode,
) -> (Report, Vec<VerificationCondition>) {
    let mut reasons: Vec<Vec<Reason>> = vec![Vec::new(); tp.callables.len()];
    for d in check_termination(tp, mode) {
        reasons[d.callable.0 as usize].push(Reason {
            kind: ReasonKind::from(d.kind),
            detail: d.describe(tp),
            line: d.site.line,
            col: d.site.col,
        });
    }
    let vcs = match vcs_for_program(tp, mode) {
        Ok(vcs) => vcs,
        Err(e) => {
            // the typechecker rejects such bodies first
            unreachable!("{e}")
        }
    };
    for vc in &vcs {
        let verdict = is_valid(&vc.formula);
        let (kind, detail) = match verdict {
            Ok(SolverVerdict::Proved) => continue,
            Ok(SolverVerdict::Counterexample(a)) => {
                let mut detail = format!("{} obligation does not hold", vc.kind);
                let shown: Vec<String> = a
                    .iter()
                    .filter(|(k, _)| !k.contains(['!', '#']))
                    .map(|(k, v)| format!("{k} = {v}"))
                    .collect();
                if !shown.is_empty() {
                    let _ = write!(detail, " (for example {})", shown.join(", "));
                }
                (ReasonKind::VcFailed, detail)
            }
            Ok(SolverVerdict::Unknown(_)) => (
                ReasonKind::VcUnknown,
                format!("{} obligation could not be decided", vc.kind),
            ),
            Err(e) => (
                ReasonKind::VcUnknown,
                format!("{} obligation could not be decided: {e}", vc.kind),
            ),
        };
        reasons[vc.owner.0 as usize].push(Reason {
            kind,
            detail,
            line: vc.origin.line,
            col: vc.origin.col,
        });
    }
    let callables = tp
        .callables
        .iter()
        .zip(reasons)
        .map(|(c, reasons)| CallableReport::new(c.name.clone(), reasons))
        .collect();
    (Report::new(file, mode, callables), vcs)
}

/// Verifies source text. Parse and type errors become a report on the
/// `<input>` pseudo-callable.
pub fn verify_source(source: &str, file: &str, mode: Mode) -> (Report, Vec<VerificationCondition>) {
    match load(source, file) {
        Ok(tp) => verify_program(&tp, file, mode),
        Err(reasons) => (Report::input_error(file, mode, reasons), Vec::new()),
    }
}

fn read(path: &Path) -> Result<String, CommandOutput> {
    std::fs::read(path)
        .map_err(|e| CommandOutput::input_error(format!("cannot read {}: {e}", path.display())))
        .and_then(|bytes| {
            String::from_utf8(bytes).map_err(|_| {
                CommandOutput::input_error(format!("{} is not valid UTF-8", path.display()))
            })
        })
}

pub fn cmd_verify(path: &Path, mode: Mode, format: Format, dump_vcs: bool) -> CommandOutput {
    let source = match read(path) {
        Ok(s) => s,
        Err(out) => return out,
    };
    let file = path.display().to_string();
    let (report, vcs) = verify_source(&source, &file, mode);
    let mut out = CommandOutput {
        code: report.exit_code(),
        ..CommandOutput::default()
    };
    let dump: String = vcs.iter().map(|v| format!("{v}\n")).collect();
    match format {
        Format::Text => {
            if dump_vcs {
                out.stdout.push_str(&dump);
            }
            out.stdout.push_str(&report.to_text());
        }
        Format::Json => {
            if dump_vcs {
                out.stderr.push_str(&dump);
            }
            out.stdout = report.to_json() + "\n";
        }
    }
    out
}

/// Reads a command-line argument as a MiniOO value.
pub fn parse_value(s: &str) -> Result<Value, String> {
    match s {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        _ => s
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("`{s}` is neither an integer nor a boolean")),
    }
}

pub fn cmd_run(
    path: &Path,
    entry: &str,
    args: &[String],
    fuel: u64,
    no_erase: bool,
    check_contracts: bool,
) -> CommandOutput {
    let source = match read(path) {
        Ok(s) => s,
        Err(out) => return out,
    };
    let tp = match load(&source, &path.display().to_string()) {
        Ok(tp) => tp,
        Err(reasons) => return CommandOutput::input_error(render_reasons(&reasons)),
    };
    let values = match args
        .iter()
        .map(|a| parse_value(a))
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(v) => v,
        Err(e) => return CommandOutput::input_error(e),
    };
    let program = if no_erase {
        tp
    } else {
        match erase(&tp) {
            Ok(p) => p,
            Err(e) => return CommandOutput::input_error(e.to_string()),
        }
    };
    let mut budget = Fuel::new(fuel);
    let outcome = eval(&program, entry, &values, &mut budget, check_contracts);
    let code = match outcome {
        Outcome::Returned(_) => EXIT_OK,
        Outcome::ContractViolation { .. } => EXIT_REJECTED,
        Outcome::FuelExhausted { .. } => EXIT_FUEL,
        Outcome::RuntimeError { .. } => EXIT_INPUT,
    };
    let text = format!("{outcome}\nframes: {}\n", budget.consumed);
    if code == EXIT_INPUT {
        CommandOutput {
            code,
            stdout: String::new(),
            stderr: text,
        }
    } else {
        CommandOutput {
            code,
            stdout: text,
            stderr: String::new(),
        }
    }
}

pub fn cmd_graph(path: &Path, overapprox: bool, dot: bool) -> CommandOutput {
    let source = match read(path) {
        Ok(s) => s,
        Err(out) => return out,
    };
    let tp = match load(&source, &path.display().to_string()) {
        Ok(tp) => tp,
        Err(reasons) => return CommandOutput::input_error(render_reasons(&reasons)),
    };
    let policy = if overapprox {
        Policy::Overapprox
    } else {
        Policy::FirstOrder
    };
    let graph = build_call_graph(&tp, policy);
    CommandOutput {
        code: EXIT_OK,
        stdout: if dot {
            to_dot(&tp, &graph)
        } else {
            to_text(&tp, &graph)
        },
        stderr: String::new(),
    }
}

fn render_reasons(reasons: &[Reason]) -> String {
    reasons
        .iter()
        .map(|r| format!("{}:{}: {}: {}", r.line, r.col, r.kind, r.detail))
        .collect::<Vec<_>>()
        .join("\n")
}
