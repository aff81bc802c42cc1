//! Shared helpers for the line-oriented ASCII formats.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Non-empty, non-comment lines of a file, with 1-based line numbers.
pub(crate) struct Lines {
    path: PathBuf,
    lines: Vec<(usize, String)>,
    pos: usize,
}

impl Lines {
    pub(crate) fn open(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Ok(Lines::from_str(path, &text))
    }

    pub(crate) fn from_str(path: &Path, text: &str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim().to_owned()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Lines { path: path.to_owned(), lines, pos: 0 }
    }

    pub(crate) fn error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone(), line, message: message.into() }
    }

    /// Next line split on whitespace, or an error naming what was expected.
    pub(crate) fn next_fields(&mut self, what: &str) -> Result<(usize, Vec<String>)> {
        match self.lines.get(self.pos) {
            Some((n, l)) => {
                self.pos += 1;
                Ok((*n, l.split_whitespace().map(str::to_owned).collect()))
            }
            None => {
                let last = self.lines.last().map_or(0, |(n, _)| *n);
                Err(self.error(last + 1, format!("unexpected end of file, expected {what}")))
            }
        }
    }

    pub(crate) fn expect_end(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            Some((n, _)) => Err(self.error(*n, "unexpected trailing data")),
            None => Ok(()),
        }
    }

    pub(crate) fn parse<T: FromStr>(&self, line: usize, field: &str) -> Result<T> {
        field.parse().map_err(|_| self.error(line, format!("cannot parse `{field}`")))
    }

    pub(crate) fn parse_finite(&self, line: usize, field: &str) -> Result<f64> {
        let v: f64 = self.parse(line, field)?;
        if !v.is_finite() {
            return Err(self.error(line, format!("non-finite value `{field}`")));
        }
        Ok(v)
    }

    /// Parses a header line `<keyword> <n1> <n2> ...`.
    pub(crate) fn header(&mut self, keyword: &str, counts: usize) -> Result<(usize, Vec<usize>)> {
        let (line, f) = self.next_fields(&format!("`{keyword}` header"))?;
        if f.first().map(String::as_str) != Some(keyword) || f.len() != counts + 1 {
            return Err(self.error(line, format!("expected header `{keyword}` with {counts} integer fields")));
        }
        let values = f[1..].iter().map(|s| self.parse::<usize>(line, s)).collect::<Result<Vec<_>>>()?;
        Ok((line, values))
    }

    pub(crate) fn flag(&self, line: usize, v: usize) -> Result<bool> {
        match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(self.error(line, format!("flag must be 0 or 1, got {v}"))),
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_owned(), source })
}

/// Formats reals with Rust's shortest round-trip representation.
pub(crate) fn join<T: Display>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
