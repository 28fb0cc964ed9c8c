//! Row-major observation matrix.

use crate::error::{Error, Result};

/// An `n × d` matrix of real observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl SampleBatch {
    /// Builds a batch from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("data dimension must be at least 1".into()));
        }
        if data.len() % d != 0 {
            return Err(Error::DimensionMismatch { expected: d, got: data.len() % d });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample batch"));
        }
        let n = data.len() / d;
        Ok(Self { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(1, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, d)
    }

    /// One-dimensional batch.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::from_flat(xs.to_vec(), 1)
    }

    pub(crate) fn from_flat_unchecked(data: Vec<f64>, d: usize) -> Self {
        debug_assert!(d > 0 && data.len() % d == 0);
        let n = data.len() / d;
        Self { data, n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// A batch with row `i` taken from row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat_unchecked(data, self.d)
    }

    /// Every coordinate multiplied by `a` and shifted by `b`.
    pub fn affine_map(&self, a: f64, b: f64) -> Self {
        Self::from_flat_unchecked(self.data.iter().map(|v| a * v + b).collect(), self.d)
    }
}
