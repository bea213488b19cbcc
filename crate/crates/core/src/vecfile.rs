//! Plain-text vector files: a `count dim` header, then `id v1 ... vdim` per line.
//!
//! Values are written with the shortest representation that round-trips.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VecFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

pub fn write_vectors<'a, W, I>(mut out: W, dim: usize, rows: I) -> io::Result<()>
where
    W: Write,
    I: ExactSizeIterator<Item = (&'a str, Vec<f64>)>,
{
    writeln!(out, "{} {}", rows.len(), dim)?;
    for (id, values) in rows {
        debug_assert_eq!(values.len(), dim);
        out.write_all(id.as_bytes())?;
        for v in values {
            write!(out, " {v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_vectors_file<'a, I>(path: &Path, dim: usize, rows: I) -> io::Result<()>
where
    I: ExactSizeIterator<Item = (&'a str, Vec<f64>)>,
{
    write_vectors(BufWriter::new(File::create(path)?), dim, rows)
}

/// Parsed vector file: ids in file order and a row-major value buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    pub dim: usize,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

pub fn read_vectors<R: BufRead>(input: R) -> Result<VectorTable, VecFileError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(VecFileError::Format {
        line: 1,
        message: "missing header".into(),
    })??;
    let mut parts = header.split_whitespace();
    let parse_usize = |s: Option<&str>, what: &str| -> Result<usize, VecFileError> {
        s.and_then(|s| s.parse().ok()).ok_or(VecFileError::Format {
            line: 1,
            message: format!("header must be `count dim`, bad {what}"),
        })
    };
    let count = parse_usize(parts.next(), "count")?;
    let dim = parse_usize(parts.next(), "dim")?;
    if parts.next().is_some() {
        return Err(VecFileError::Format {
            line: 1,
            message: "header must be `count dim`".into(),
        });
    }

    let mut ids = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields.next().unwrap_or_default().to_string();
        let before = values.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| VecFileError::Format {
                line: line_no,
                message: format!("not a number: {f:?}"),
            })?;
            values.push(v);
        }
        if values.len() - before != dim {
            return Err(VecFileError::Format {
                line: line_no,
                message: format!("expected {dim} values, found {}", values.len() - before),
            });
        }
        ids.push(id);
    }
    if ids.len() != count {
        return Err(VecFileError::Format {
            line: ids.len() + 1,
            message: format!("header declares {count} rows, found {}", ids.len()),
        });
    }
    Ok(VectorTable { dim, ids, values })
}

pub fn read_vectors_file(path: &Path) -> Result<VectorTable, VecFileError> {
    read_vectors(BufReader::new(File::open(path)?))
}
