use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use super::{EXIT_INPUT, EXIT_OK, EXIT_REJECTED};
use crate::callgraph::{DiagnosticKind, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonKind {
    VcFailed,
    VcUnknown,
    SelfContractUse,
    ContractCycle,
    RecursiveFieldInitializer,
    MissingDecreases,
    LambdaInCycle,
    TypeError,
}

impl ReasonKind {
    pub const ALL: [ReasonKind; 8] = [
        ReasonKind::VcFailed,
        ReasonKind::VcUnknown,
        ReasonKind::SelfContractUse,
        ReasonKind::ContractCycle,
        ReasonKind::RecursiveFieldInitializer,
        ReasonKind::MissingDecreases,
        ReasonKind::LambdaInCycle,
        ReasonKind::TypeError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasonKind::VcFailed => "vc_failed",
            ReasonKind::VcUnknown => "vc_unknown",
            ReasonKind::SelfContractUse => "self_contract_use",
            ReasonKind::ContractCycle => "contract_cycle",
            ReasonKind::RecursiveFieldInitializer => "recursive_field_initializer",
            ReasonKind::MissingDecreases => "missing_decreases",
            ReasonKind::LambdaInCycle => "lambda_in_cycle",
            ReasonKind::TypeError => "type_error",
        }
    }

    pub fn is_termination(self) -> bool {
        !matches!(
            self,
            ReasonKind::VcFailed | ReasonKind::VcUnknown | ReasonKind::TypeError
        )
    }
}

impl fmt::Display for ReasonKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<DiagnosticKind> for ReasonKind {
    fn from(k: DiagnosticKind) -> Self {
        match k {
            DiagnosticKind::SelfContractUse => ReasonKind::SelfContractUse,
            DiagnosticKind::ContractCycle => ReasonKind::ContractCycle,
            DiagnosticKind::RecursiveFieldInitializer => ReasonKind::RecursiveFieldInitializer,
            DiagnosticKind::MissingDecreases => ReasonKind::MissingDecreases,
            DiagnosticKind::LambdaInCycle => ReasonKind::LambdaInCycle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reason {
    pub kind: ReasonKind,
    pub detail: String,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Rejected,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Verdict::Verified => "verified",
            Verdict::Rejected => "rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallableReport {
    pub name: String,
    pub verdict: Verdict,
    pub reasons: Vec<Reason>,
}

impl CallableReport {
    pub fn new(name: String, reasons: Vec<Reason>) -> Self {
        let verdict = if reasons.is_empty() {
            Verdict::Verified
        } else {
            Verdict::Rejected
        };
        CallableReport {
            name,
            verdict,
            reasons,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub verified: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub file: String,
    pub mode: Mode,
    pub callables: Vec<CallableReport>,
    pub summary: Summary,
}

/// Name under which parse and type errors are reported.
pub const INPUT_PSEUDO_CALLABLE: &str = "<input>";

impl Report {
    pub fn new(file: &str, mode: Mode, callables: Vec<CallableReport>) -> Self {
        let verified = callables
            .iter()
            .filter(|c| c.verdict == Verdict::Verified)
            .count();
        Report {
            file: file.to_string(),
            mode,
            summary: Summary {
                verified,
                rejected: callables.len() - verified,
            },
            callables,
        }
    }

    pub fn input_error(file: &str, mode: Mode, reasons: Vec<Reason>) -> Self {
        Report::new(
            file,
            mode,
            vec![CallableReport::new(
                INPUT_PSEUDO_CALLABLE.to_string(),
                reasons,
            )],
        )
    }

    pub fn is_input_error(&self) -> bool {
        self.callables
            .iter()
            .flat_map(|c| &c.reasons)
            .any(|r| r.kind == ReasonKind::TypeError)
    }

    /// Verified when every callable is.
    pub fn verdict(&self) -> Verdict {
        if self.summary.rejected == 0 {
            Verdict::Verified
        } else {
            Verdict::Rejected
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            EXIT_INPUT
        } else if self.verdict() == Verdict::Verified {
            EXIT_OK
        } else {
            EXIT_REJECTED
        }
    }

    pub fn callable(&self, name: &str) -> Option<&CallableReport> {
        self.callables.iter().find(|c| c.name == name)
    }

    pub fn reason_kinds(&self) -> impl Iterator<Item = ReasonKind> + '_ {
        self.callables
            .iter()
            .flat_map(|c| c.reasons.iter().map(|r| r.kind))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// One line per callable, reasons indented beneath.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} [{}]\n", self.file, self.mode);
        for c in &self.callables {
            let _ = writeln!(out, "  {:<10} {}", c.verdict, c.name);
            for r in &c.reasons {
                let _ = writeln!(out, "      {}:{} {}: {}", r.line, r.col, r.kind, r.detail);
            }
        }
        let _ = writeln!(
            out,
            "{} verified, {} rejected",
            self.summary.verified, self.summary.rejected
        );
        out
    }
}
