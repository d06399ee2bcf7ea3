//! Delimited text matrices.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, DenseMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Tsv,
}

impl Format {
    pub fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Tsv => "tsv",
        }
    }

    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") || e.eq_ignore_ascii_case("tab") => Format::Tsv,
            _ => Format::Csv,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            _ => Err(Error::InvalidArgument(format!("unknown format '{s}'"))),
        }
    }
}

/// Parses a delimited matrix. A first row containing any non-numeric field is
/// taken as a header and skipped; blank lines are ignored. Positions in errors
/// are 1-based lines and fields of the input.
pub fn parse_matrix(text: &str, format: Format) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map_or(idx + 1, |p| p.line() as usize),
            col: 0,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if rows.is_empty() && width.is_none() && parsed.iter().any(|p| p.is_err()) {
            width = Some(rec.len());
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::RaggedRows {
                row: line,
                expected,
                found: rec.len(),
            });
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (c, (p, field)) in parsed.into_iter().zip(rec.iter()).enumerate() {
            match p {
                Ok(v) => vals.push(v),
                Err(_) => {
                    return Err(Error::Parse {
                        row: line,
                        col: c + 1,
                        message: format!("not a number: '{field}'"),
                    })
                }
            }
        }
        rows.push((line, vals));
    }
    let ncols = rows.first().map_or(0, |(_, r)| r.len());
    Ok(DenseMatrix::from_fn(rows.len(), ncols, |i, j| rows[i].1[j]))
}

pub fn read_matrix(path: &Path, format: Format) -> Result<DenseMatrix> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_matrix(&text, format)
}

fn write_rows<W: Write>(mut w: W, nrows: usize, ncols: usize, format: Format, cell: impl Fn(usize, usize) -> String) -> Result<()> {
    let delim = format.delimiter() as char;
    for i in 0..nrows {
        let mut line = String::new();
        for j in 0..ncols {
            if j > 0 {
                line.push(delim);
            }
            line.push_str(&cell(i, j));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Formats a double with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix_to<W: Write>(m: &DenseMatrix, w: W, format: Format) -> Result<()> {
    write_rows(w, m.nrows(), m.ncols(), format, |i, j| format_f64(m[(i, j)]))
}

pub fn write_matrix(m: &DenseMatrix, path: &Path, format: Format) -> Result<()> {
    write_matrix_to(m, BufWriter::new(File::create(path)?), format)
}

/// Writes a binary matrix as 0/1 entries.
pub fn write_binary(t: &BinaryMatrix, path: &Path, format: Format) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    write_rows(w, t.nrows(), t.ncols(), format, |i, j| if t.get(i, j) { "1" } else { "0" }.to_string())
}
