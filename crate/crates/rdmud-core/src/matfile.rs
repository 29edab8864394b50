//! RDMUD-MAT v1: a plain-text matrix interchange format.
//!
//! ```text
//! RDMUD-MAT v1 <M> <N> <real|complex>
//! <row 0: N whitespace-separated entries>
//! ...
//! <row M-1>
//! ```
//!
//! Complex entries are written as `re,im` pairs. Writers emit 17 significant
//! digits, so a write/read cycle is bit-exact for f64 data.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

const MAGIC: &str = "RDMUD-MAT";
const VERSION: &str = "v1";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Matrix is real iff every imaginary part is exactly zero.
fn is_real(values: &DMatrix<C64>) -> bool {
    values.iter().all(|c| c.im == 0.0)
}

fn fmt_entry(c: &C64, real: bool) -> String {
    if real {
        format!("{:.16e}", c.re)
    } else {
        format!("{:.16e},{:.16e}", c.re, c.im)
    }
}

/// Serialize a matrix to a string in RDMUD-MAT v1 format.
pub fn render_matrix(values: &DMatrix<C64>) -> String {
    let real = is_real(values);
    let kind = if real { "real" } else { "complex" };
    let mut out = format!(
        "{MAGIC} {VERSION} {} {} {kind}\n",
        values.nrows(),
        values.ncols()
    );
    for i in 0..values.nrows() {
        let row: Vec<String> = (0..values.ncols())
            .map(|j| fmt_entry(&values[(i, j)], real))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, values: &DMatrix<C64>) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(render_matrix(values).as_bytes())
        .map_err(|e| io_err(path, e))
}

/// Write a column vector as an `M x 1` matrix.
pub fn write_vector(path: &Path, v: &DVector<C64>) -> Result<()> {
    let m = DMatrix::from_fn(v.len(), 1, |i, _| v[i]);
    write_matrix(path, &m)
}

fn parse_scalar(tok: &str, complex: bool, line: usize) -> Result<C64> {
    if complex {
        let (re, im) = tok
            .split_once(',')
            .ok_or_else(|| parse_err(line, format!("expected `re,im` pair, got `{tok}`")))?;
        let re: f64 = re
            .parse()
            .map_err(|_| parse_err(line, format!("non-numeric real part `{re}`")))?;
        let im: f64 = im
            .parse()
            .map_err(|_| parse_err(line, format!("non-numeric imaginary part `{im}`")))?;
        Ok(C64::new(re, im))
    } else {
        if tok.contains(',') {
            return Err(parse_err(
                line,
                format!("complex entry `{tok}` in a matrix declared real"),
            ));
        }
        let re: f64 = tok
            .parse()
            .map_err(|_| parse_err(line, format!("non-numeric entry `{tok}`")))?;
        Ok(C64::new(re, 0.0))
    }
}

/// Parse RDMUD-MAT v1 text.
pub fn parse_matrix(text: &str) -> Result<DMatrix<C64>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty input".to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(parse_err(
            1,
            format!("expected header `{MAGIC} {VERSION} <M> <N> <real|complex>`, got `{header}`"),
        ));
    }
    let m: usize = fields[2]
        .parse()
        .map_err(|_| parse_err(1, format!("bad row count `{}`", fields[2])))?;
    let n: usize = fields[3]
        .parse()
        .map_err(|_| parse_err(1, format!("bad column count `{}`", fields[3])))?;
    let complex = match fields[4] {
        "real" => false,
        "complex" => true,
        other => return Err(parse_err(1, format!("bad field kind `{other}`"))),
    };
    if m == 0 || n == 0 {
        return Err(parse_err(1, "matrix dimensions must be positive"));
    }
    let mut values = DMatrix::<C64>::zeros(m, n);
    let mut filled = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if filled >= m {
            return Err(parse_err(lineno, format!("more than {m} data rows")));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != n {
            return Err(parse_err(
                lineno,
                format!("expected {n} entries, found {}", toks.len()),
            ));
        }
        for (j, tok) in toks.iter().enumerate() {
            values[(filled, j)] = parse_scalar(tok, complex, lineno)?;
        }
        filled += 1;
    }
    if filled != m {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {m} data rows, found {filled}"),
        ));
    }
    Ok(values)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<C64>> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| io_err(path, e))?;
    parse_matrix(&text)
}

/// Read a vector stored as an `M x 1` (or `1 x M`) matrix.
pub fn read_vector(path: &Path) -> Result<DVector<C64>> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 {
        Ok(DVector::from_fn(m.nrows(), |i, _| m[(i, 0)]))
    } else if m.nrows() == 1 {
        Ok(DVector::from_fn(m.ncols(), |j, _| m[(0, j)]))
    } else {
        Err(Error::dim(format!(
            "expected a vector file, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}
