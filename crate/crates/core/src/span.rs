use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// Location of a node in its source file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, start: usize, end: usize, line: u32, col: u32) -> Self {
        debug_assert!(start <= end);
        Self {
            file,
            start,
            end,
            line,
            col,
        }
    }

    /// A placeholder span for synthesized nodes and for structural comparison.
    pub fn dummy() -> Self {
        Self {
            file: Arc::from(""),
            start: 0,
            end: 0,
            line: 0,
            col: 0,
        }
    }

    /// Smallest span covering both `self` and `other` (which must share a file).
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        let (first, _) = if self.start <= other.start {
            (self, other)
        } else {
            (other, self)
        };
        SourceSpan {
            file: self.file.clone(),
            start: self.start.min(other.start),
            end: self.end.max(other.end),
            line: first.line,
            col: first.col,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}
