//! Matrix Market text I/O for square real matrices.
//!
//! Writing uses `coordinate real symmetric` for symmetric input (lower triangle,
//! diagonal included when nonzero) and `array real general` otherwise. Reading
//! accepts `array` and `coordinate` with `real`, `integer` or `pattern` fields
//! and `general` or `symmetric` symmetry. Indices in files are 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("matrix market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported matrix market header: {0}")]
    Unsupported(String),
}

fn perr(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

/// Serializes `m` to Matrix Market text.
pub fn to_matrix_market(m: &Matrix) -> String {
    let n = m.n();
    let mut out = String::new();
    if m.asymmetry() == 0.0 {
        let mut entries = Vec::new();
        for j in 0..n {
            for i in j..n {
                let v = m.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
        let _ = writeln!(out, "{n} {n} {}", entries.len());
        for (i, j, v) in entries {
            let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
        }
    } else {
        out.push_str("%%MatrixMarket matrix array real general\n");
        let _ = writeln!(out, "{n} {n}");
        for j in 0..n {
            for i in 0..n {
                let _ = writeln!(out, "{:e}", m.get(i, j));
            }
        }
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &Matrix) -> Result<(), IoError> {
    fs::write(path, to_matrix_market(m))?;
    Ok(())
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Matrix, IoError> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

pub fn parse_matrix_market(text: &str) -> Result<Matrix, IoError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(IoError::Unsupported(header.to_string()));
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        _ => return Err(IoError::Unsupported(header.to_string())),
    };
    let pattern = match h[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" if coordinate => true,
        _ => return Err(IoError::Unsupported(header.to_string())),
    };
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        _ => return Err(IoError::Unsupported(header.to_string())),
    };

    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (sl, size) = body.next().ok_or_else(|| perr(1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| perr(sl + 1, format!("bad size token {t:?}"))))
        .collect::<Result<_, _>>()?;
    let (rows, cols) = match dims.as_slice() {
        [r, c, ..] => (*r, *c),
        _ => return Err(perr(sl + 1, "size line needs rows and columns")),
    };
    if rows != cols {
        return Err(perr(sl + 1, format!("matrix must be square, got {rows}x{cols}")));
    }
    let n = rows;
    let mut m = Matrix::zeros(n);
    let num = |tok: Option<&str>, line: usize| -> Result<f64, IoError> {
        let t = tok.ok_or_else(|| perr(line, "missing value"))?;
        t.parse::<f64>().map_err(|_| perr(line, format!("bad number {t:?}")))
    };

    if coordinate {
        let nnz = *dims.get(2).ok_or_else(|| perr(sl + 1, "coordinate size line needs nnz"))?;
        let mut seen = 0;
        for (ln, line) in body {
            let mut it = line.split_whitespace();
            let i = num(it.next(), ln + 1)? as usize;
            let j = num(it.next(), ln + 1)? as usize;
            if i == 0 || j == 0 || i > n || j > n {
                return Err(perr(ln + 1, format!("index ({i}, {j}) out of range")));
            }
            let v = if pattern { 1.0 } else { num(it.next(), ln + 1)? };
            m.set(i - 1, j - 1, v);
            if symmetric {
                m.set(j - 1, i - 1, v);
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(perr(sl + 1, format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        let mut vals = Vec::new();
        for (ln, line) in body {
            for t in line.split_whitespace() {
                vals.push(num(Some(t), ln + 1)?);
            }
        }
        let expected = if symmetric { n * (n + 1) / 2 } else { n * n };
        if vals.len() != expected {
            return Err(perr(sl + 1, format!("expected {expected} values, found {}", vals.len())));
        }
        let mut k = 0;
        for j in 0..n {
            let start = if symmetric { j } else { 0 };
            for i in start..n {
                m.set(i, j, vals[k]);
                if symmetric {
                    m.set(j, i, vals[k]);
                }
                k += 1;
            }
        }
    }
    Ok(m)
}
