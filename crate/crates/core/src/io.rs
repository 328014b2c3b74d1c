//! Delimited-text input: comma or tab separated, one observation per row,
//! optional header row.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// Numeric table with optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.rows.first().map_or_else(|| self.header.as_ref().map_or(0, Vec::len), Vec::len)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::Parse(format!("no column named {name:?}")))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Removes column `j`, returning it.
    pub fn take_column(&mut self, j: usize) -> Vec<f64> {
        if let Some(h) = self.header.as_mut() {
            h.remove(j);
        }
        self.rows.iter_mut().map(|r| r.remove(j)).collect()
    }

    /// Every entry as a flat vector, row by row.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

fn sniff_delimiter(first_line: &str) -> u8 {
    if first_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Parses delimited text. A first row with any non-numeric field is a header.
pub fn parse_table<R: Read>(reader: R) -> Result<Table> {
    let mut buf = BufReader::new(reader);
    let mut text = String::new();
    buf.read_to_string(&mut text)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(first))
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Parse(format!("record {}: non-finite value", line + 1)));
                }
                rows.push(v)
            }
            Err(_) if header.is_none() && rows.is_empty() => {
                header = Some(rec.iter().map(str::to_string).collect());
            }
            Err(e) => return Err(Error::Parse(format!("record {}: {e}", line + 1))),
        }
    }
    let table = Table { header, rows };
    let width = table.ncols();
    if let Some(bad) = table.rows.iter().position(|r| r.len() != width) {
        return Err(Error::Parse(format!("data row {} has {} fields, expected {width}", bad + 1, table.rows[bad].len())));
    }
    Ok(table)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_table(f)
}

/// A single-column file, or one column of a wider file chosen by name.
pub fn read_vector(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let t = read_table(path)?;
    match column {
        Some(name) => Ok(t.column(t.column_index(name)?)),
        None if t.ncols() == 1 => Ok(t.column(0)),
        None if t.rows.len() == 1 => Ok(t.rows[0].clone()),
        None => Err(Error::Parse(format!("{}: expected a single row or column", path.display()))),
    }
}

/// Whitespace-, comma- or newline-separated non-negative integers.
pub fn read_indices(path: &Path) -> Result<Vec<usize>> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(tok.parse().map_err(|_| Error::Parse(format!("{}: bad index {tok:?}", path.display())))?);
        }
    }
    Ok(out)
}
