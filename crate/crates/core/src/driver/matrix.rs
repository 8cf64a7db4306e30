use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::{ReasonKind, Report, Verdict};
use super::{verify_source, CommandOutput, Format, EXIT_INPUT, EXIT_OK, EXIT_REJECTED};
use crate::callgraph::Mode;

/// One expected verdict. Without `callable` the cell is the whole file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callable: Option<String>,
    pub mode: Mode,
    pub expected: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason_kind: Option<ReasonKind>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("cannot read corpus file {path}: {source}")]
    Corpus {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatrixCell {
    #[serde(flatten)]
    pub entry: ManifestEntry,
    pub actual: Verdict,
    pub reasons: Vec<ReasonKind>,
    pub matches: bool,
}

impl MatrixCell {
    fn row(&self) -> String {
        match &self.entry.callable {
            Some(c) => format!("{}::{c}", self.entry.file),
            None => self.entry.file.clone(),
        }
    }
}

#[derive(Serialize)]
struct MatrixJson<'a> {
    cells: &'a [MatrixCell],
    all_match: bool,
}

pub fn parse_manifest(text: &str, path: &str) -> Result<Vec<ManifestEntry>, ManifestError> {
    serde_json::from_str(text).map_err(|source| ManifestError::Json {
        path: path.to_string(),
        source,
    })
}

fn evaluate(entry: &ManifestEntry, report: &Report) -> MatrixCell {
    let found = match &entry.callable {
        None => Some((report.verdict(), report.reason_kinds().collect::<Vec<_>>())),
        Some(name) => report
            .callable(name)
            .map(|c| (c.verdict, c.reasons.iter().map(|r| r.kind).collect())),
    };
    let exists = found.is_some();
    // a callable that does not exist cannot match anything
    let (actual, mut reasons) = found.unwrap_or((Verdict::Rejected, Vec::new()));
    reasons.sort();
    reasons.dedup();
    let matches = exists
        && actual == entry.expected
        && entry.reason_kind.is_none_or(|k| reasons.contains(&k));
    MatrixCell {
        entry: entry.clone(),
        actual,
        reasons,
        matches,
    }
}

/// Verifies every manifest entry. Each (file, mode) pair is verified once.
pub fn run_matrix(dir: &Path, entries: &[ManifestEntry]) -> Result<Vec<MatrixCell>, ManifestError> {
    let mut sources: BTreeMap<&str, String> = BTreeMap::new();
    for e in entries {
        if !sources.contains_key(e.file.as_str()) {
            let path = dir.join(&e.file);
            let text = std::fs::read_to_string(&path).map_err(|source| ManifestError::Corpus {
                path: path.display().to_string(),
                source,
            })?;
            sources.insert(&e.file, text);
        }
    }
    let mut reports: BTreeMap<(&str, Mode), Report> = BTreeMap::new();
    Ok(entries
        .iter()
        .map(|e| {
            let report = reports
                .entry((e.file.as_str(), e.mode))
                .or_insert_with(|| verify_source(&sources[e.file.as_str()], &e.file, e.mode).0);
            evaluate(e, report)
        })
        .collect())
}

fn render_text(cells: &[MatrixCell]) -> String {
    let mut rows: Vec<String> = Vec::new();
    let mut grid: BTreeMap<(String, Mode), &MatrixCell> = BTreeMap::new();
    for c in cells {
        let row = c.row();
        if !rows.contains(&row) {
            rows.push(row.clone());
        }
        grid.insert((row, c.entry.mode), c);
    }
    let width = rows.iter().map(String::len).max().unwrap_or(0).max(4);
    let mut out = format!("{:<width$}", "file");
    for m in Mode::ALL {
        let _ = write!(out, "  {:<11}", m.as_str());
    }
    out = out.trim_end().to_string() + "\n";
    for row in &rows {
        let mut line = format!("{row:<width$}");
        for m in Mode::ALL {
            let cell = match grid.get(&(row.clone(), m)) {
                Some(c) if c.matches => c.actual.to_string(),
                Some(c) => format!("{}!", c.actual),
                None => "-".to_string(),
            };
            let _ = write!(line, "  {cell:<11}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    let mismatches: Vec<&MatrixCell> = cells.iter().filter(|c| !c.matches).collect();
    if mismatches.is_empty() {
        let _ = writeln!(out, "all {} cells match", cells.len());
    } else {
        let _ = writeln!(out, "{} of {} cells differ:", mismatches.len(), cells.len());
        for c in mismatches {
            let found: Vec<&str> = c.reasons.iter().map(|k| k.as_str()).collect();
            let _ = write!(
                out,
                "  {} [{}]: expected {}",
                c.row(),
                c.entry.mode,
                c.entry.expected
            );
            if let Some(k) = c.entry.reason_kind {
                let _ = write!(out, " with {k}");
            }
            let _ = write!(out, ", got {}", c.actual);
            if !found.is_empty() {
                let _ = write!(out, " ({})", found.join(", "));
            }
            out.push('\n');
        }
    }
    out
}

pub fn cmd_matrix(dir: &Path, manifest: &Path, format: Format) -> CommandOutput {
    let fail = |e: ManifestError| CommandOutput {
        code: EXIT_INPUT,
        stdout: String::new(),
        stderr: format!("{e}\n"),
    };
    let text = match std::fs::read_to_string(manifest) {
        Ok(t) => t,
        Err(source) => {
            return fail(ManifestError::Io {
                path: manifest.display().to_string(),
                source,
            })
        }
    };
    let cells = match parse_manifest(&text, &manifest.display().to_string())
        .and_then(|entries| run_matrix(dir, &entries))
    {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let all_match = cells.iter().all(|c| c.matches);
    let stdout = match format {
        Format::Text => render_text(&cells),
        Format::Json => {
            serde_json::to_string_pretty(&MatrixJson {
                cells: &cells,
                all_match,
            })
            .expect("matrix serializes")
                + "\n"
        }
    };
    CommandOutput {
        code: if all_match { EXIT_OK } else { EXIT_REJECTED },
        stdout,
        stderr: String::new(),
    }
}
