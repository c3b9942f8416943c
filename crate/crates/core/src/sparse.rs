//! Minimal compressed-sparse-row matrices.
//!
//! Only the handful of operations the assembly and solver paths need:
//! construction from triplets, transpose, products, diagonal scaling and
//! densification.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub trait Entry: Copy + Default + PartialEq + Add<Output = Self> + Mul<Output = Self> {}

impl<T> Entry for T where T: Copy + Default + PartialEq + Add<Output = T> + Mul<Output = T> {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Entry> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and explicit zeros (including cancellations) are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut sorted: Vec<(usize, usize, T)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let (r, c, mut v) = sorted[i];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            i += 1;
            while i < sorted.len() && sorted[i].0 == r && sorted[i].1 == c {
                v = v + sorted[i].2;
                i += 1;
            }
            if v != T::default() {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "dimension mismatch in sparse product");
        let mut triplets = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, rhs.ncols, &triplets)
    }

    pub fn map<U: Entry>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        let t: Vec<_> = self.triplets().map(|(r, c, v)| (r, c, f(v))).collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }
}

impl CsrMatrix<i64> {
    pub fn to_f64(&self) -> CsrMatrix<f64> {
        self.map(|v| v as f64)
    }
}

impl CsrMatrix<f64> {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn mul_dvector(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.mul_vec(x.as_slice()))
    }

    /// `diag(left) * self * diag(right)`.
    pub fn scale_rows_cols(&self, left: Option<&[f64]>, right: Option<&[f64]>) -> Self {
        let t: Vec<_> = self
            .triplets()
            .map(|(r, c, v)| {
                let l = left.map_or(1.0, |d| d[r]);
                let rr = right.map_or(1.0, |d| d[c]);
                (r, c, l * v * rr)
            })
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let t: Vec<_> = self.triplets().chain(rhs.triplets()).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let t: Vec<_> = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(values.len(), values.len(), &t)
    }

    /// Symmetric part `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let t: Vec<_> = self
            .triplets()
            .flat_map(|(r, c, v)| [(r, c, 0.5 * v), (c, r, 0.5 * v)])
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Principal submatrix on the given (sorted or unsorted) index set.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.nrows];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new;
        }
        let mut t = Vec::new();
        for (new_r, &old_r) in keep.iter().enumerate() {
            for (c, v) in self.row(old_r) {
                let new_c = position[c];
                if new_c != usize::MAX {
                    t.push((new_r, new_c, v));
                }
            }
        }
        Self::from_triplets(keep.len(), keep.len(), &t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }
}
