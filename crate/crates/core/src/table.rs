//! Plain-text numeric tables: `#`-prefixed header lines followed by
//! comma-separated rows. All file formats of the crate share this layout.

use std::fmt::Write as _;

use crate::{Error, Result};

/// A data row together with its 1-based line number in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: usize,
    pub values: Vec<f64>,
}

/// Parsed table: header lines (without the leading `#`) and numeric rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedTable {
    pub header: Vec<(usize, String)>,
    pub rows: Vec<Row>,
}

pub fn parse(text: &str) -> Result<ParsedTable> {
    let mut out = ParsedTable::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            out.header.push((line, rest.trim().to_string()));
            continue;
        }
        let values = trimmed
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("cannot parse `{f}` as a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(line, "non-finite value"));
        }
        out.rows.push(Row { line, values });
    }
    Ok(out)
}

/// Extracts `key=value` pairs from a header line such as
/// `waveform v1 electrodes=15 dt_us=1`.
pub fn header_fields(header: &str) -> Vec<(&str, &str)> {
    header
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect()
}

pub fn header_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header_fields(header)
        .into_iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

/// Formats a float so that parsing it back gives the identical value.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:e}")
}

/// Writer for CSV output with a metadata header.
#[derive(Debug, Clone, Default)]
pub struct TableWriter {
    buf: String,
}

impl TableWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, line: impl AsRef<str>) -> &mut Self {
        let _ = writeln!(self.buf, "# {}", line.as_ref());
        self
    }

    pub fn columns(&mut self, names: &[&str]) -> &mut Self {
        let _ = writeln!(self.buf, "# columns: {}", names.join(", "));
        self
    }

    /// Writes one row with a fixed number of significant digits.
    pub fn row(&mut self, values: &[f64]) -> &mut Self {
        let s: Vec<String> = values.iter().map(|v| format!("{v:.9e}")).collect();
        let _ = writeln!(self.buf, "{}", s.join(", "));
        self
    }

    /// Writes one row in round-trip exact notation.
    pub fn row_exact(&mut self, values: &[f64]) -> &mut Self {
        let s: Vec<String> = values.iter().map(|v| fmt_exact(*v)).collect();
        let _ = writeln!(self.buf, "{}", s.join(", "));
        self
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
