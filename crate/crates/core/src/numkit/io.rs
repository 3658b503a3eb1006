//! Flat little-endian tensor files: 4 magic bytes, `u64` rows, `u64` cols,
//! then `rows * cols` row-major `f32` values.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

pub const TENSOR_MAGIC: [u8; 4] = *b"NKT1";

pub fn write_tensor<T: Scalar, W: Write>(w: &mut W, m: &Matrix<T>) -> std::io::Result<()> {
    w.write_all(&TENSOR_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.len() * 4);
    for &x in m.as_slice() {
        buf.extend_from_slice(&(x.to_f64_lossy() as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_tensor<T: Scalar, R: Read>(r: &mut R) -> Result<Matrix<T>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if magic != TENSOR_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    read_exact(r, &mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    read_exact(r, &mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format(format!("{rows}x{cols} overflows")))?;
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Matrix::new(rows, cols, data)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated tensor: {e}")))
}
