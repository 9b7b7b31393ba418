//! Compressed sparse row matrices over `Complex64`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

#[cfg(feature = "parallel")]
use crate::kernels::CHUNK;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut triplets = Vec::with_capacity(n);
        for (i, &d) in diag.iter().enumerate() {
            triplets.push((i, i, d));
        }
        Self::from_triplets(n, n, triplets)
    }

    /// Builds a matrix from (row, col, value) triplets; duplicates are summed
    /// and exact zeros are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        };
        m.prune(0.0);
        m
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

    /// Iterates over the stored entries of row `r` as (col, value).
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out.push((r, c, v));
            }
        }
        out
    }

    /// Removes entries with modulus ≤ `tol`.
    pub fn prune(&mut self, tol: f64) {
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let v = self.values[k];
                if v.norm() > tol {
                    indices.push(self.indices[k]);
                    values.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= s;
        }
        out
    }

    pub fn add_scaled(&self, other: &Self, s: Complex64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = self.triplets();
        trip.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, v * s)));
        Self::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn adjoint(&self) -> Self {
        let trip = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v.conj()))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, trip)
    }

    /// Sparse product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows);
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        for r in 0..self.nrows {
            acc.clear();
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    *acc.entry(c).or_default() += a * b;
                }
            }
            for (&c, &v) in acc.iter() {
                if v != Complex64::new(0.0, 0.0) {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            indptr,
            indices,
            values,
        }
    }

    fn row_dot(&self, r: usize, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in self.indptr[r]..self.indptr[r + 1] {
            acc += self.values[k] * x[self.indices[k]];
        }
        acc
    }

    /// y = A·x, one row at a time.
    pub fn matvec_seq(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = self.row_dot(r, x);
        }
    }

    /// y = A·x with rows distributed over the rayon pool. Each row is summed
    /// in storage order, so the result matches `matvec_seq` bit for bit.
    #[cfg(feature = "parallel")]
    pub fn matvec_par(&self, x: &[Complex64], y: &mut [Complex64]) {
        use rayon::prelude::*;
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(chunk, ys)| {
                let base = chunk * CHUNK;
                for (i, yr) in ys.iter_mut().enumerate() {
                    *yr = self.row_dot(base + i, x);
                }
            });
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        #[cfg(feature = "parallel")]
        if self.nrows > 2 * CHUNK {
            return self.matvec_par(x, y);
        }
        self.matvec_seq(x, y)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0; self.ncols];
        for (c, v) in self.indices.iter().zip(&self.values) {
            cols[*c] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// Frobenius norm restricted to rows and columns where `keep` is true.
    pub fn frobenius_masked(&self, keep: &[bool]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.nrows {
            if !keep[r] {
                continue;
            }
            for (c, v) in self.row(r) {
                if keep[c] {
                    s += v.norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.nrows, self.ncols, Complex64::new(0.0, 0.0));
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &DMatrix<Complex64>, tol: f64) -> Self {
        let mut trip = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > tol {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, c(0.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0));
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, c(1.0)), (0, 2, Complex64::new(0.0, 2.0)), (2, 1, c(-1.5))],
        );
        let b = CsrMatrix::from_triplets(3, 3, vec![(2, 0, c(4.0)), (1, 1, c(3.0)), (0, 2, c(0.5))]);
        let dense = a.to_dense() * b.to_dense();
        let sparse = a.matmul(&b).to_dense();
        assert!((dense - sparse).norm() < 1e-15);
    }

    #[test]
    fn adjoint_is_conjugate_transpose() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(0, 2, Complex64::new(1.0, 2.0))]);
        let at = a.adjoint();
        assert_eq!((at.nrows(), at.ncols()), (3, 2));
        assert_eq!(at.get(2, 0), Complex64::new(1.0, -2.0));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matvec_is_bitwise_identical() {
        let n = 20_000;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, Complex64::new(i as f64 * 1e-3, 0.3)));
            if i + 2 < n {
                trip.push((i, i + 2, Complex64::new(0.1, -(i as f64).sqrt())));
            }
        }
        let m = CsrMatrix::from_triplets(n, n, trip);
        let x: Vec<_> = (0..n).map(|i| Complex64::new((i as f64).cos(), 0.5)).collect();
        let mut y1 = vec![Complex64::default(); n];
        let mut y2 = y1.clone();
        m.matvec_seq(&x, &mut y1);
        m.matvec_par(&x, &mut y2);
        assert_eq!(y1, y2);
    }
}
