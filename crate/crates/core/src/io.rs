//! File formats: CSV number formatting and the binary reference-matrix layout.
//!
//! Reference files start with the 8-byte magic `LRSREF01`, followed by the
//! row and column counts as little-endian `u64` and the entries in row-major
//! order as little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

pub const REFERENCE_MAGIC: &[u8; 8] = b"LRSREF01";

/// `printf("%.16e")` rendering: mantissa with 16 decimals, signed exponent of
/// at least two digits.
pub fn format_c_exp(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.16e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn encode_reference(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * m.len());
    out.extend_from_slice(REFERENCE_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_reference(bytes: &[u8]) -> Result<DenseMatrix> {
    let bad = |msg: &str| Error::InvalidProblem(format!("reference file: {msg}"));
    if bytes.len() < 24 || &bytes[..8] != REFERENCE_MAGIC {
        return Err(bad("missing magic header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(8) as usize, word(16) as usize);
    let n = rows.checked_mul(cols).ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != 24 + 8 * n {
        return Err(bad("length does not match dimensions"));
    }
    let data = &bytes[24..];
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| {
        let at = 8 * (i * cols + j);
        f64::from_le_bytes(data[at..at + 8].try_into().expect("8 bytes"))
    }))
}

pub fn write_reference(path: &Path, m: &DenseMatrix) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_reference(m))?;
    Ok(())
}

pub fn read_reference(path: &Path) -> Result<DenseMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_reference(&bytes)
}
