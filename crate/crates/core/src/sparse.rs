//! Compressed sparse row storage for complex matrices.
//!
//! Only what the superoperator machinery needs: assembly from triplets,
//! linear combinations, products with vectors, and extraction of the
//! invariant subspace reachable from a given support.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Assembles a matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed; entries that sum to zero are kept so that
    /// the sparsity pattern depends only on the triplet positions.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indptr[r + 1] += 1;
                indices.push(c);
                data.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        match self.indices[lo..hi].binary_search(&c) {
            Ok(k) => self.data[lo + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Same row/column pattern as `other`.
    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    pub fn scaled(&self, s: Complex64) -> CsrMatrix {
        CsrMatrix {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: Complex64) -> Result<CsrMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: other.nrows,
            });
        }
        let mut triplets: Vec<_> = self.iter().collect();
        triplets.extend(other.iter().map(|(r, c, v)| (r, c, v * s)));
        Ok(CsrMatrix::from_triplets(self.nrows, self.ncols, triplets))
    }

    /// Adds `s` to every diagonal entry.
    pub fn shift_diagonal(&self, s: Complex64) -> CsrMatrix {
        let n = self.nrows.min(self.ncols);
        let mut triplets: Vec<_> = self.iter().collect();
        triplets.extend((0..n).map(|i| (i, i, s)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, triplets)
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A` for a row functional `x`.
    pub fn left_mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.ncols];
        for (r, xr) in x.iter().enumerate() {
            if *xr == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += xr * self.data[k];
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> CsrMatrix {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    triplets.push((r, c, v));
                }
            }
        }
        CsrMatrix::from_triplets(m.nrows(), m.ncols(), triplets)
    }

    /// Indices reachable from `seeds` by repeated application of the matrix,
    /// sorted ascending. The span of the corresponding unit vectors is
    /// invariant under the matrix, so products, resolvents and exponentials
    /// acting on vectors supported in `seeds` never leave it.
    pub fn reachable_from(&self, seeds: &[usize]) -> Vec<usize> {
        assert_eq!(self.nrows, self.ncols, "reachability needs a square matrix");
        // column adjacency: j -> rows i with A[i, j] != 0
        let mut col_ptr = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            col_ptr[c + 1] += 1;
        }
        for c in 0..self.ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut fill = col_ptr.clone();
        let mut rows_of = vec![0usize; self.indices.len()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                rows_of[fill[c]] = r;
                fill[c] += 1;
            }
        }
        let mut seen = vec![false; self.nrows];
        let mut stack: Vec<usize> = Vec::new();
        for &s in seeds {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
        while let Some(j) = stack.pop() {
            for &i in &rows_of[col_ptr[j]..col_ptr[j + 1]] {
                if !seen[i] {
                    seen[i] = true;
                    stack.push(i);
                }
            }
        }
        (0..self.nrows).filter(|&i| seen[i]).collect()
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn restrict(&self, idx: &[usize]) -> CsrMatrix {
        let mut pos = vec![usize::MAX; self.ncols];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut triplets = Vec::new();
        for (k, &r) in idx.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    triplets.push((k, pos[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(idx.len(), idx.len(), triplets)
    }
}

pub(crate) fn support(x: &[Complex64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != Complex64::new(0.0, 0.0))
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}
