//! Line-oriented text formats.
//!
//! A space file is: the point count, the labels on one line, then the
//! full distance matrix row by row.  Entries are non-negative rationals
//! written "p/q", or plain integers when the denominator is 1.  Within
//! any file, `#` starts a comment and blank lines are skipped.  Labeled
//! value files ("label value" per line) carry prescriptions and weights;
//! pair files ("left right" per line) carry partial maps; family files
//! list one label set per line.  The realization-index sidecar uses
//! "S-labels | f-values | realizing-label".

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::katetov::KatetovFunction;
use crate::scalar::{from_u64, Scalar};
use crate::space::{FiniteMetricSpace, MetricError};

/// Why a file cannot be read or written.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError<T: Scalar> {
    #[error("line {line}: expected {expected}")]
    Malformed { line: usize, expected: String },
    #[error("line {line}: bad number \"{token}\"")]
    BadNumber { line: usize, token: String },
    #[error("file ends before the data is complete")]
    Truncated,
    #[error("label \"{label}\" contains whitespace or is empty and cannot be written")]
    UnwritableLabel { label: String },
    #[error("line {line}: label {label} appears twice")]
    DuplicateLabel { line: usize, label: String },
    #[error(transparent)]
    Metric(#[from] MetricError<T>),
}

/// Content lines with their 1-based positions; comments and blanks gone.
fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                None
            } else {
                Some((i + 1, line))
            }
        })
        .collect()
}

/// Parses "p/q" or "p" into an exact non-negative scalar.
fn parse_scalar<T: Scalar>(token: &str, line: usize) -> Result<T, FormatError<T>> {
    let bad = || FormatError::BadNumber {
        line,
        token: token.to_string(),
    };
    match token.split_once('/') {
        Some((p, q)) => {
            let p: u64 = p.parse().map_err(|_| bad())?;
            let q: u64 = q.parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(from_u64::<T>(p) / from_u64::<T>(q))
        }
        None => {
            let p: u64 = token.parse().map_err(|_| bad())?;
            Ok(from_u64::<T>(p))
        }
    }
}

fn writable_label<T: Scalar>(label: &str) -> Result<&str, FormatError<T>> {
    if label.is_empty() || label.chars().any(|c| c.is_whitespace()) || label.contains('#') {
        Err(FormatError::UnwritableLabel {
            label: label.to_string(),
        })
    } else {
        Ok(label)
    }
}

/// Reads a space file and validates the matrix.
pub fn parse_space<T: Scalar>(text: &str) -> Result<FiniteMetricSpace<T>, FormatError<T>> {
    let lines = content_lines(text);
    let mut it = lines.iter();
    let (nline, ntext) = it.next().ok_or(FormatError::Truncated)?;
    let n: usize = ntext.parse().map_err(|_| FormatError::Malformed {
        line: *nline,
        expected: "the point count".to_string(),
    })?;
    if n == 0 {
        return Err(FormatError::Malformed {
            line: *nline,
            expected: "a positive point count".to_string(),
        });
    }
    let (lline, ltext) = it.next().ok_or(FormatError::Truncated)?;
    let labels: Vec<String> = ltext.split_whitespace().map(str::to_string).collect();
    if labels.len() != n {
        return Err(FormatError::Malformed {
            line: *lline,
            expected: format!("{n} labels"),
        });
    }
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
    for _ in 0..n {
        let (rline, rtext) = it.next().ok_or(FormatError::Truncated)?;
        let tokens: Vec<&str> = rtext.split_whitespace().collect();
        if tokens.len() != n {
            return Err(FormatError::Malformed {
                line: *rline,
                expected: format!("{n} matrix entries"),
            });
        }
        let row: Vec<T> = tokens
            .iter()
            .map(|t| parse_scalar(t, *rline))
            .collect::<Result<_, _>>()?;
        rows.push(row);
    }
    Ok(FiniteMetricSpace::validate_metric(labels, rows)?)
}

/// Writes a space in the canonical layout.  Scalars render through their
/// `Display`, which prints "p/q" and plain integers exactly as the parser
/// expects.
pub fn serialize_space<T: Scalar>(space: &FiniteMetricSpace<T>) -> Result<String, FormatError<T>> {
    let mut out = String::new();
    let _ = writeln!(out, "{}", space.len());
    let labels: Vec<&str> = space
        .labels()
        .iter()
        .map(|l| writable_label::<T>(l))
        .collect::<Result<_, _>>()?;
    let _ = writeln!(out, "{}", labels.join(" "));
    for i in 0..space.len() {
        let row: Vec<String> = (0..space.len())
            .map(|j| space.dist(i, j).to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    Ok(out)
}

/// Reads "label value" lines, rejecting repeated labels.
pub fn parse_labeled_values<T: Scalar>(
    text: &str,
) -> Result<Vec<(String, T)>, FormatError<T>> {
    let mut out: Vec<(String, T)> = Vec::new();
    for (line, content) in content_lines(text) {
        let mut tokens = content.split_whitespace();
        let (label, value) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(l), Some(v), None) => (l, v),
            _ => {
                return Err(FormatError::Malformed {
                    line,
                    expected: "a label and a value".to_string(),
                })
            }
        };
        if out.iter().any(|(l, _)| l == label) {
            return Err(FormatError::DuplicateLabel {
                line,
                label: label.to_string(),
            });
        }
        out.push((label.to_string(), parse_scalar(value, line)?));
    }
    Ok(out)
}

/// Reads a prescription file into a Katětov function candidate.
pub fn parse_katetov<T: Scalar>(text: &str) -> Result<KatetovFunction<T>, FormatError<T>> {
    let mut f = KatetovFunction::new();
    for (label, value) in parse_labeled_values(text)? {
        f.assign(label, value);
    }
    Ok(f)
}

/// Reads a weight file into a label-to-value map.
pub fn parse_weights<T: Scalar>(text: &str) -> Result<BTreeMap<String, T>, FormatError<T>> {
    Ok(parse_labeled_values(text)?.into_iter().collect())
}

pub fn serialize_labeled_values<T: Scalar>(
    values: &[(String, T)],
) -> Result<String, FormatError<T>> {
    let mut out = String::new();
    for (label, value) in values {
        let _ = writeln!(out, "{} {}", writable_label::<T>(label)?, value);
    }
    Ok(out)
}

/// Reads "left right" lines.
pub fn parse_pairs<T: Scalar>(text: &str) -> Result<Vec<(String, String)>, FormatError<T>> {
    let mut out = Vec::new();
    for (line, content) in content_lines(text) {
        let mut tokens = content.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => out.push((a.to_string(), b.to_string())),
            _ => {
                return Err(FormatError::Malformed {
                    line,
                    expected: "two labels".to_string(),
                })
            }
        }
    }
    Ok(out)
}

pub fn serialize_pairs<T: Scalar>(pairs: &[(String, String)]) -> Result<String, FormatError<T>> {
    let mut out = String::new();
    for (a, b) in pairs {
        let _ = writeln!(out, "{} {}", writable_label::<T>(a)?, writable_label::<T>(b)?);
    }
    Ok(out)
}

/// Reads one label family per line.
pub fn parse_families<T: Scalar>(text: &str) -> Result<Vec<Vec<String>>, FormatError<T>> {
    Ok(content_lines(text)
        .into_iter()
        .map(|(_, content)| content.split_whitespace().map(str::to_string).collect())
        .collect())
}

/// Writes the realization index as "S-labels | f-values | realizing-label"
/// lines.
pub fn serialize_sidecar<T: Scalar>(
    index: &BTreeMap<(Vec<String>, Vec<T>), String>,
) -> Result<String, FormatError<T>> {
    let mut out = String::new();
    for ((labels, values), realizer) in index {
        let ls: Vec<&str> = labels
            .iter()
            .map(|l| writable_label::<T>(l))
            .collect::<Result<_, _>>()?;
        let vs: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            out,
            "{} | {} | {}",
            ls.join(" "),
            vs.join(" "),
            writable_label::<T>(realizer)?
        );
    }
    Ok(out)
}

/// Reads a realization-index sidecar.
pub fn parse_sidecar<T: Scalar>(
    text: &str,
) -> Result<BTreeMap<(Vec<String>, Vec<T>), String>, FormatError<T>> {
    let mut out = BTreeMap::new();
    for (line, content) in content_lines(text) {
        let parts: Vec<&str> = content.split('|').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(FormatError::Malformed {
                line,
                expected: "three |-separated fields".to_string(),
            });
        }
        let labels: Vec<String> = parts[0].split_whitespace().map(str::to_string).collect();
        let values: Vec<T> = parts[1]
            .split_whitespace()
            .map(|t| parse_scalar(t, line))
            .collect::<Result<_, _>>()?;
        if labels.is_empty() || labels.len() != values.len() {
            return Err(FormatError::Malformed {
                line,
                expected: "as many values as labels".to_string(),
            });
        }
        let realizer = parts[2];
        if realizer.split_whitespace().count() != 1 {
            return Err(FormatError::Malformed {
                line,
                expected: "a single realizing label".to_string(),
            });
        }
        out.insert((labels, values), realizer.to_string());
    }
    Ok(out)
}
