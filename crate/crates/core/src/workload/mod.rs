//! Analytical query workloads: parsing log files into grouping attributes,
//! fact measures and conjunctive dimension restrictions.

mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{AttrRef, StarSchema};

pub use parser::parse_query;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Aggregate {
    Sum,
    Avg,
    Min,
    Max,
    Count,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measure {
    pub function: Aggregate,
    /// `None` for `COUNT(*)`.
    pub attribute: Option<AttrRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateKind {
    Equality,
    InList,
    Between,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestrictionPredicate {
    pub attribute: AttrRef,
    pub kind: PredicateKind,
    /// Number of distinct literals: 1 for equality, the list length for IN.
    /// Ranges store 1; the cost model derives their width from its parameters.
    pub value_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnalyticalQuery {
    pub id: String,
    pub grouping: BTreeSet<AttrRef>,
    pub measures: Vec<Measure>,
    pub restrictions: Vec<RestrictionPredicate>,
    pub joined_dimensions: BTreeSet<String>,
    pub weight: u64,
}

impl AnalyticalQuery {
    pub fn restricted_attributes(&self) -> BTreeSet<&AttrRef> {
        self.restrictions.iter().map(|r| &r.attribute).collect()
    }
}

/// Indexable attributes of a query: its grouping attributes plus every restricted attribute.
pub fn extract_indexable(query: &AnalyticalQuery) -> BTreeSet<AttrRef> {
    query.grouping.iter().chain(query.restrictions.iter().map(|r| &r.attribute)).cloned().collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkloadBatch {
    pub queries: Vec<AnalyticalQuery>,
    pub skipped: usize,
    pub source: String,
}

impl WorkloadBatch {
    /// Prefixes every query id with `label/`, making ids unique across batches.
    pub fn relabel(mut self, label: &str) -> Self {
        for q in &mut self.queries {
            q.id = format!("{label}/{}", q.id);
        }
        self
    }

    pub fn total_weight(&self) -> u64 {
        self.queries.iter().map(|q| q.weight).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Unsupported,
    Resolution,
}

/// Parse failure with the byte offset of the offending token inside the statement.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn syntax(offset: usize, expected: &str, found: &str) -> Self {
        Self { kind: ParseErrorKind::Syntax, offset, message: format!("expected {expected}, found `{found}`") }
    }

    pub(crate) fn unsupported(offset: usize, construct: &str) -> Self {
        Self { kind: ParseErrorKind::Unsupported, offset, message: format!("unsupported construct: {construct}") }
    }

    pub(crate) fn resolution(offset: usize, message: &str) -> Self {
        Self { kind: ParseErrorKind::Resolution, offset, message: message.to_string() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at byte {})", self.message, self.offset)
    }
}

/// A raw statement cut out of a log, with its pragma weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub text: String,
    /// `Some(Err)` when the weight pragma was malformed.
    pub weight: Option<Result<u64, String>>,
    pub terminated: bool,
}

/// Splits a log into `;`-terminated statements, honoring string literals,
/// `--` comments and the `-- weight: n` pragma directly above a statement.
pub fn split_statements(text: &str) -> Vec<Statement> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut pending_weight: Option<Result<u64, String>> = None;
    let mut weight_for_current: Option<Result<u64, String>> = None;
    let mut chars = text.char_indices().peekable();

    while let Some((i, c)) = chars.next() {
        match c {
            '-' if text[i..].starts_with("--") => {
                let end = text[i..].find('\n').map_or(text.len(), |e| i + e);
                let comment = &text[i + 2..end];
                if current.trim().is_empty() {
                    pending_weight = parse_weight_pragma(comment);
                }
                while chars.peek().is_some_and(|(j, _)| *j < end) {
                    chars.next();
                }
            }
            '\'' => {
                if current.trim().is_empty() {
                    weight_for_current = pending_weight.take();
                }
                current.push(c);
                while let Some((_, sc)) = chars.next() {
                    current.push(sc);
                    if sc == '\'' {
                        if chars.peek().is_some_and(|(_, n)| *n == '\'') {
                            current.push('\'');
                            chars.next();
                        } else {
                            break;
                        }
                    }
                }
            }
            ';' => {
                if !current.trim().is_empty() {
                    out.push(Statement {
                        text: current.trim().to_string(),
                        weight: weight_for_current.take(),
                        terminated: true,
                    });
                }
                current.clear();
                pending_weight = None;
            }
            _ => {
                if current.trim().is_empty() && !c.is_whitespace() {
                    weight_for_current = pending_weight.take();
                }
                current.push(c);
            }
        }
    }
    if !current.trim().is_empty() {
        out.push(Statement { text: current.trim().to_string(), weight: weight_for_current.take(), terminated: false });
    }
    out
}

/// `None` when the comment is not a weight pragma at all.
fn parse_weight_pragma(comment: &str) -> Option<Result<u64, String>> {
    let rest = comment.trim().strip_prefix("weight:")?;
    let value = rest.trim();
    Some(match value.parse::<u64>() {
        Ok(w) if w >= 1 => Ok(w),
        _ => Err(format!("invalid weight `{value}`")),
    })
}

/// Stable query id from the statement's position and a hash of its text.
pub fn query_id(position: usize, text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    format!("q{position:04}-{hex}")
}

/// Parses every statement of a log; failures are logged and counted, never fatal.
pub fn parse_workload(text: &str, schema: &StarSchema, source: &str) -> WorkloadBatch {
    let mut batch = WorkloadBatch { source: source.to_string(), ..Default::default() };
    for (n, stmt) in split_statements(text).into_iter().enumerate() {
        let position = n + 1;
        if !stmt.terminated {
            log::warn!("{source}: statement {position} is not terminated by `;`, skipped");
            batch.skipped += 1;
            continue;
        }
        let weight = match stmt.weight {
            None => 1,
            Some(Ok(w)) => w,
            Some(Err(e)) => {
                log::warn!("{source}: statement {position}: {e}, skipped");
                batch.skipped += 1;
                continue;
            }
        };
        match parse_query(&stmt.text, schema) {
            Ok(mut q) => {
                q.id = query_id(position, &stmt.text);
                q.weight = weight;
                batch.queries.push(q);
            }
            Err(e) => {
                log::warn!("{source}: statement {position} skipped: {e}");
                batch.skipped += 1;
            }
        }
    }
    batch
}

pub fn load_workload(path: impl AsRef<Path>, schema: &StarSchema) -> std::io::Result<WorkloadBatch> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    Ok(parse_workload(&text, schema, &path.display().to_string()))
}
