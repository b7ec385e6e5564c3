//! MatrixMarket and single-column CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{OptError, Result};
use crate::linalg::DenseMatrix;

fn parse_err(msg: impl Into<String>) -> OptError {
    OptError::InvalidParameter(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> OptError {
    OptError::InvalidParameter(format!("{}: {e}", path.display()))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_err(format!("line {line}: cannot parse {tok:?} as a number")))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| parse_err(format!("line {line}: cannot parse {tok:?} as an index")))
}

/// Reads a real MatrixMarket matrix in `array` or `coordinate` format,
/// `general` or `symmetric`.
pub fn parse_matrix_market(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err("empty MatrixMarket file"))?;
    let head: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if head.len() < 5 || head[0] != "%%matrixmarket" || head[1] != "matrix" {
        return Err(parse_err(format!("bad MatrixMarket header {header:?}")));
    }
    let coordinate = match head[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(format!("unsupported MatrixMarket format {other:?}"))),
    };
    if head[3] != "real" && head[3] != "integer" && head[3] != "double" {
        return Err(parse_err(format!("unsupported MatrixMarket field {:?}", head[3])));
    }
    let symmetric = match head[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(format!("unsupported MatrixMarket symmetry {other:?}"))),
    };
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_line, size) = body.next().ok_or_else(|| parse_err("missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let want = if coordinate { 3 } else { 2 };
    if dims.len() != want {
        return Err(parse_err(format!("line {}: size line needs {want} fields", size_line + 1)));
    }
    let rows = parse_usize(dims[0], size_line + 1)?;
    let cols = parse_usize(dims[1], size_line + 1)?;
    let mut a = DenseMatrix::zeros(rows, cols);
    if coordinate {
        let nnz = parse_usize(dims[2], size_line + 1)?;
        let mut seen = 0;
        for (ln, line) in body {
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 3 {
                return Err(parse_err(format!("line {}: expected `i j value`", ln + 1)));
            }
            let i = parse_usize(tok[0], ln + 1)?;
            let j = parse_usize(tok[1], ln + 1)?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(parse_err(format!("line {}: index ({i}, {j}) out of range", ln + 1)));
            }
            let v = parse_f64(tok[2], ln + 1)?;
            a[(i - 1, j - 1)] = v;
            if symmetric {
                a[(j - 1, i - 1)] = v;
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        // Column-major; symmetric files list the lower triangle only.
        let values: Vec<(usize, &str)> = body.flat_map(|(ln, l)| l.split_whitespace().map(move |t| (ln, t))).collect();
        let expected = if symmetric { rows * (rows + 1) / 2 } else { rows * cols };
        if values.len() != expected {
            return Err(parse_err(format!("expected {expected} values, found {}", values.len())));
        }
        let mut it = values.into_iter();
        for j in 0..cols {
            let start = if symmetric { j } else { 0 };
            for i in start..rows {
                let (ln, tok) = it.next().expect("count checked");
                let v = parse_f64(tok, ln + 1)?;
                a[(i, j)] = v;
                if symmetric {
                    a[(j, i)] = v;
                }
            }
        }
    }
    Ok(a)
}

/// Writes a dense matrix in `array real general` format with 17 significant digits.
pub fn format_matrix_market(a: &DenseMatrix) -> String {
    let mut out = String::with_capacity(a.rows() * a.cols() * 26 + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let _ = writeln!(out, "{:.16e}", a[(i, j)]);
        }
    }
    out
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_matrix_market(&text).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix_market(a)).map_err(|e| io_err(path, e))
}

/// One number per line; blank lines and a non-numeric first line (header) are skipped.
pub fn parse_vector_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if ln == 0 => {}
            Err(_) => return Err(parse_err(format!("line {}: cannot parse {t:?} as a number", ln + 1))),
        }
    }
    Ok(out)
}

pub fn format_vector_csv(v: &[f64]) -> String {
    let mut out = String::with_capacity(v.len() * 26);
    for x in v {
        let _ = writeln!(out, "{x:.16e}");
    }
    out
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_vector_csv(&text).map_err(|e| e.context(path.display().to_string()))
}

pub fn write_vector_csv(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_vector_csv(v)).map_err(|e| io_err(path, e))
}
