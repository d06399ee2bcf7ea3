//! Matrix types shared by every module.
//!
//! Real-valued data and factors use [`DenseMatrix`], a plain alias for the
//! nalgebra dynamic matrix. The binary factor is stored as [`BinaryMatrix`],
//! column-major with one byte per entry so that columns are contiguous
//! slices that can be compared and hashed directly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub type DenseMatrix = DMatrix<f64>;

/// An `m x r` matrix with entries in {0, 1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0; nrows * ncols],
        }
    }

    /// Builds a matrix from columns of equal length.
    ///
    /// # Panics
    /// Panics if the columns differ in length or contain values other than 0/1.
    pub fn from_columns(nrows: usize, columns: &[Vec<u8>]) -> Self {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for col in columns {
            assert_eq!(col.len(), nrows, "column length mismatch");
            assert!(col.iter().all(|&v| v <= 1), "non-binary entry");
            data.extend_from_slice(col);
        }
        Self {
            nrows,
            ncols: columns.len(),
            data,
        }
    }

    /// Rounds a real matrix at `threshold` (strictly greater maps to 1).
    pub fn from_dense_threshold(m: &DenseMatrix, threshold: f64) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] > threshold {
                    out.set(i, j, true);
                }
            }
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[j * self.nrows + i] == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[j * self.nrows + i] = u8::from(v);
    }

    pub fn column(&self, j: usize) -> &[u8] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.ncols).map(move |j| self.column(j))
    }

    /// Row `i` packed into an integer, bit `k` holding column `k`.
    pub fn row_code(&self, i: usize) -> u64 {
        (0..self.ncols).fold(0u64, |acc, k| acc | (u64::from(self.get(i, k)) << k))
    }

    pub fn set_row_code(&mut self, i: usize, code: u64) {
        for k in 0..self.ncols {
            self.set(i, k, (code >> k) & 1 == 1);
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.nrows, self.ncols, |i, j| f64::from(self.data[j * self.nrows + i]))
    }

    /// `lo + (hi - lo) * T`, the representation used when the binary levels
    /// are shifted away from {0, 1}.
    pub fn to_levels(&self, lo: f64, hi: f64) -> DenseMatrix {
        let span = hi - lo;
        DenseMatrix::from_fn(self.nrows, self.ncols, |i, j| {
            lo + span * f64::from(self.data[j * self.nrows + i])
        })
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                if self.get(i, j) {
                    out.set(j, i, true);
                }
            }
        }
        out
    }

    /// Returns a copy with columns reordered so that output column `k` is
    /// input column `perm[k]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let cols: Vec<Vec<u8>> = perm.iter().map(|&k| self.column(k).to_vec()).collect();
        Self::from_columns(self.nrows, &cols)
    }

    /// Number of entries where the two matrices differ.
    pub fn hamming(&self, other: &Self) -> usize {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Frobenius norm of `d - t * a`.
pub fn residual_fro(d: &DenseMatrix, t: &DenseMatrix, a: &DenseMatrix) -> f64 {
    (d - t * a).norm()
}

/// Column means of `d` as a vector of length `nrows`.
pub fn column_mean(d: &DenseMatrix) -> nalgebra::DVector<f64> {
    let n = d.ncols() as f64;
    let mut p = nalgebra::DVector::zeros(d.nrows());
    for j in 0..d.ncols() {
        p += d.column(j);
    }
    p / n
}
