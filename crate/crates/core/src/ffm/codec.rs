use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FfmError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FfmEntry {
    pub field: u32,
    pub feature: u32,
    pub value: f64,
}

/// One libffm row. Entries are sorted by field with at most one entry per field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfmRow {
    pub label: u8,
    pub entries: Vec<FfmEntry>,
}

impl fmt::Display for FfmRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        for e in &self.entries {
            // f64 Display is the shortest string that parses back to the same value.
            write!(f, " {}:{}:{}", e.field, e.feature, e.value)?;
        }
        Ok(())
    }
}

fn parse_u32(tok: &str, offset: usize, what: &str) -> Result<u32, FfmError> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return Err(FfmError::Parse {
            offset,
            message: format!("{what} {tok:?} is not an unsigned integer"),
        });
    }
    tok.parse().map_err(|_| FfmError::Parse {
        offset,
        message: format!("{what} {tok:?} out of range"),
    })
}

impl FfmRow {
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Parses `<label> (<field>:<feature>:<value>)*` with single-space separators.
    pub fn parse_line(line: &str) -> Result<Self, FfmError> {
        let mut tokens = line.split(' ');
        let mut offset = 0;
        let label_tok = tokens.next().unwrap_or_default();
        let label = match label_tok {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(FfmError::Parse {
                    offset: 0,
                    message: format!("label {other:?} is not 0 or 1"),
                })
            }
        };
        offset += label_tok.len() + 1;

        let mut entries: Vec<FfmEntry> = Vec::new();
        for tok in tokens {
            let mut parts = tok.splitn(3, ':');
            let (Some(f), Some(j), Some(v)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(FfmError::Parse {
                    offset,
                    message: format!("token {tok:?} is not field:feature:value"),
                });
            };
            let field = parse_u32(f, offset, "field id")?;
            let feature = parse_u32(j, offset + f.len() + 1, "feature id")?;
            let value_offset = offset + f.len() + j.len() + 2;
            let value: f64 = v
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite() && !v.starts_with('+'))
                .ok_or_else(|| FfmError::Parse {
                    offset: value_offset,
                    message: format!("value {v:?} is not a finite decimal"),
                })?;
            if let Some(prev) = entries.last() {
                if entries.iter().any(|e| e.field == field) {
                    return Err(FfmError::DuplicateField { offset, field });
                }
                if prev.field > field {
                    return Err(FfmError::Parse {
                        offset,
                        message: format!("field {field} follows field {}", prev.field),
                    });
                }
            }
            entries.push(FfmEntry { field, feature, value });
            offset += tok.len() + 1;
        }
        Ok(Self { label, entries })
    }
}

/// Reads rows from a reader; errors carry 1-based line numbers.
pub fn read_rows<R: BufRead>(r: R) -> Result<Vec<FfmRow>, FfmError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        rows.push(FfmRow::parse_line(&line).map_err(|e| FfmError::Line {
            line: i + 1,
            error: Box::new(e),
        })?);
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(mut w: W, rows: &[FfmRow]) -> Result<(), FfmError> {
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<FfmRow>, FfmError> {
    read_rows(BufReader::new(File::open(path)?))
}

pub fn write_dataset(rows: &[FfmRow], path: impl AsRef<Path>) -> Result<(), FfmError> {
    write_rows(BufWriter::new(File::create(path)?), rows)
}
