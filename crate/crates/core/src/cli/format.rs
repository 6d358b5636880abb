//! The `sparseconv 1` vector file.
//!
//! ```text
//! sparseconv 1
//! n 10
//! 2 7
//! 8 1
//! ```
//!
//! Records are `<index> <value>` with strictly increasing indices below `n`
//! and positive values, all in canonical decimal. Lines end in LF.

use std::fmt::Write as _;
use std::path::Path;

use num_traits::Signed;

use crate::error::Error;
use crate::vector::{ExactInt, Index, SparseVec};

use super::CliError;

pub const FORMAT_TAG: &str = "sparseconv";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub file: Option<String>,
    pub line: usize,
    pub msg: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}: ")?;
        }
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ParseError {}

fn fail<T>(line: usize, msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Parse(ParseError {
        file: None,
        line,
        msg: msg.into(),
    }))
}

/// Digits only, no sign and no leading zero unless the number is 0.
fn canonical_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit()) && (s == "0" || !s.starts_with('0'))
}

pub fn parse_vector(text: &str) -> Result<SparseVec, CliError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    for (no, line) in body.split('\n').enumerate() {
        if line.ends_with([' ', '\t', '\r']) {
            return fail(no + 1, "trailing whitespace");
        }
    }
    match lines.next() {
        Some((_, l)) if l == format!("{FORMAT_TAG} {FORMAT_VERSION}") => {}
        Some((no, l)) => return fail(no, format!("expected header `{FORMAT_TAG} {FORMAT_VERSION}`, found `{l}`")),
        None => return fail(1, "empty file"),
    }
    let n: Index = match lines.next() {
        Some((no, l)) => match l.strip_prefix("n ") {
            Some(v) if canonical_digits(v) => v.parse().map_err(|_| ParseError {
                file: None,
                line: no,
                msg: format!("length `{v}` does not fit in 64 bits"),
            })?,
            _ => return fail(no, format!("expected `n <length>`, found `{l}`")),
        },
        None => return fail(2, "missing length line"),
    };
    let mut entries: Vec<(Index, ExactInt)> = Vec::new();
    for (no, line) in lines {
        let Some((idx, val)) = line.split_once(' ') else {
            return fail(no, format!("expected `<index> <value>`, found `{line}`"));
        };
        if !canonical_digits(idx) {
            return fail(no, format!("bad index `{idx}`"));
        }
        let i: Index = idx.parse().map_err(|_| ParseError {
            file: None,
            line: no,
            msg: format!("index `{idx}` does not fit in 64 bits"),
        })?;
        if i >= n {
            return Err(CliError::Engine(Error::IndexOutOfRange { index: i, length: n }));
        }
        if let Some(&(prev, _)) = entries.last() {
            if i <= prev {
                return fail(no, format!("index {i} does not follow {prev}"));
            }
        }
        if let Some(mag) = val.strip_prefix('-') {
            if canonical_digits(mag) && mag != "0" {
                return Err(CliError::Engine(Error::NegativeEntry(i)));
            }
        }
        if !canonical_digits(val) || val == "0" {
            return fail(no, format!("value `{val}` is not a positive decimal integer"));
        }
        let v: ExactInt = val.parse().expect("checked digits");
        entries.push((i, v));
    }
    Ok(SparseVec::from_pairs(n, entries)?)
}

pub fn format_vector(v: &SparseVec) -> Result<String, Error> {
    if let Some(i) = v.first_negative() {
        return Err(Error::NegativeEntry(i));
    }
    let mut s = format!("{FORMAT_TAG} {FORMAT_VERSION}\nn {}\n", v.length());
    for (i, x) in v.iter() {
        debug_assert!(x.is_positive());
        writeln!(s, "{i} {x}").unwrap();
    }
    Ok(s)
}

pub fn read_vector(path: &Path) -> Result<SparseVec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
    parse_vector(&text).map_err(|e| match e {
        CliError::Parse(p) => CliError::Parse(ParseError {
            file: Some(path.display().to_string()),
            ..p
        }),
        other => other,
    })
}

pub fn write_vector(path: &Path, v: &SparseVec) -> Result<(), CliError> {
    let text = format_vector(v)?;
    std::fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))
}
