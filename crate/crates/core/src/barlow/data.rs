//! Flat binary sample file: three little-endian `u64` values `N, H, W`,
//! then `N * H * W` little-endian `f64` values, row-major. Raw vectors use
//! `H = 1`.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fsutil::{read_bytes, write_atomic};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn new(n: usize, h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * h * w {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", n * h * w),
                found: format!("{} values", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample value".into()));
        }
        Ok(Self { n, h, w, values })
    }

    pub fn from_rows(rows: &Array2<f64>) -> Result<Self> {
        let (n, w) = rows.dim();
        Self::new(n, 1, w, rows.iter().copied().collect())
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.h * self.w;
        &self.values[i * d..(i + 1) * d]
    }

    pub fn image(&self, i: usize) -> Array2<f64> {
        Array2::from_shape_vec((self.h, self.w), self.sample(i).to_vec()).expect("shape checked at construction")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.values.len());
        for v in [self.n, self.h, self.w] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 {
            return Err(Error::InvalidBinary("header shorter than 24 bytes".into()));
        }
        let dim = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8 bytes")) as usize;
        let (n, h, w) = (dim(0), dim(1), dim(2));
        let count = n
            .checked_mul(h)
            .and_then(|x| x.checked_mul(w))
            .ok_or_else(|| Error::InvalidBinary("dimensions overflow".into()))?;
        if bytes.len() != 24 + 8 * count {
            return Err(Error::InvalidBinary(format!(
                "expected {} bytes for {n}x{h}x{w}, found {}",
                24 + 8 * count,
                bytes.len()
            )));
        }
        let values = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::new(n, h, w, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let s = SampleSet::new(2, 1, 3, vec![0.5, -1.0, 2.25, 1e-300, 7.0, 0.0]).unwrap();
        assert_eq!(SampleSet::from_bytes(&s.to_bytes()).unwrap(), s);
    }

    #[test]
    fn truncated_file() {
        let s = SampleSet::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
        let b = s.to_bytes();
        assert!(matches!(SampleSet::from_bytes(&b[..b.len() - 1]), Err(Error::InvalidBinary(_))));
        assert!(matches!(SampleSet::from_bytes(&b[..10]), Err(Error::InvalidBinary(_))));
    }
}
