//! Matrix file formats.
//!
//! Binary container: `b"PSDM"`, `u32` version (= 1), `u64` dimension `n`,
//! then `n*n` little-endian `f64` values in row-major order.
//! CSV: `n` lines of `n` comma-separated decimals.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PSDM";
pub const VERSION: u32 = 1;

pub fn write_binary<W: Write>(m: &Matrix, mut w: W) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Matrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("missing PSDM magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PSDM version {version}")));
    }
    let mut dword = [0u8; 8];
    r.read_exact(&mut dword)?;
    let n = u64::from_le_bytes(dword) as usize;
    let count = n
        .checked_mul(n)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Matrix::from_vec(n, n, data)
}

pub fn parse_csv(text: &str) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: '{}': {}", lineno + 1, tok.trim(), e)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let m = Matrix::from_rows(&rows)?;
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Ok(m)
}

pub fn to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Reads a matrix, choosing the format by extension (`.csv`) or magic bytes.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{} is neither PSDM nor CSV", path.display())))?;
        parse_csv(&text)
    }
}

/// Writes CSV when the extension is `.csv`, the binary container otherwise.
pub fn write_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        fs::write(path, to_csv(m))?;
    } else {
        let mut buf = Vec::with_capacity(16 + 8 * m.rows() * m.cols());
        write_binary(m, &mut buf)?;
        fs::write(path, buf)?;
    }
    Ok(())
}
