//! Compressed sparse row matrices with a shareable sparsity pattern.
//!
//! Precision matrices built for different parameter values on the same grid
//! share one [`SparsityPattern`] through an `Arc`, which lets a symbolic
//! factorization be reused across them.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Build from per-row column lists; each list is sorted and deduplicated.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < n_cols));
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Self { n_rows: row_ptr.len() - 1, n_cols, row_ptr, col_idx }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row_cols(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Index into the value array of entry `(r, c)`, if stored.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.row_cols(r).binary_search(&c).ok().map(|k| start + k)
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.n_rows).map(|r| self.row_ptr[r + 1] - self.row_ptr[r]).max().unwrap_or(0)
    }

    pub fn min_row_nnz(&self) -> usize {
        (0..self.n_rows).map(|r| self.row_ptr[r + 1] - self.row_ptr[r]).min().unwrap_or(0)
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.n_rows == self.n_cols
            && (0..self.n_rows).all(|r| self.row_cols(r).iter().all(|&c| self.position(c, r).is_some()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch { expected: pattern.nnz(), got: values.len() });
        }
        Ok(Self { pattern, values })
    }

    /// Sum duplicate triplets into a matrix.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_rows];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Parse(format!("entry ({r}, {c}) outside {n_rows} x {n_cols}")));
            }
            rows[r].push(c);
        }
        let pattern = Arc::new(SparsityPattern::from_rows(n_cols, rows));
        let mut values = vec![0.0; pattern.nnz()];
        for &(r, c, v) in triplets {
            values[pattern.position(r, c).expect("inserted")] += v;
        }
        Ok(Self { pattern, values })
    }

    pub fn from_dense(n: usize, dense: &[f64]) -> Self {
        let triplets: Vec<_> = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter(|&(r, c)| dense[r * n + c] != 0.0 || r == c)
            .map(|(r, c)| (r, c, dense[r * n + c]))
            .collect();
        Self::from_triplets(n, n, &triplets).expect("in range")
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|k| (k, k, 1.0)).collect();
        Self::from_triplets(n, n, &triplets).expect("in range")
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1];
        self.pattern.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pattern.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows().min(self.n_cols())).map(|k| self.get(k, k)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols() {
            return Err(Error::DimensionMismatch { expected: self.n_cols(), got: x.len() });
        }
        Ok((0..self.n_rows()).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect())
    }

    /// `x^T M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let y = self.mul_vec(x)?;
        Ok(x.iter().zip(&y).map(|(a, b)| a * b).sum())
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows() {
            triplets.extend(self.row(r).map(|(c, v)| (c, r, v)));
        }
        Self::from_triplets(self.n_cols(), self.n_rows(), &triplets).expect("in range")
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n_cols();
        let mut d = vec![0.0; self.n_rows() * n];
        for r in 0..self.n_rows() {
            for (c, v) in self.row(r) {
                d[r * n + c] += v;
            }
        }
        d
    }

    /// Largest `|M_rc - M_cr|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n_rows() {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `self + diag(d)`; the pattern must already contain the diagonal.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n_rows() {
            return Err(Error::DimensionMismatch { expected: self.n_rows(), got: d.len() });
        }
        let mut out = self.clone();
        for (k, &dk) in d.iter().enumerate() {
            let pos = self
                .pattern
                .position(k, k)
                .ok_or_else(|| Error::InvalidSpec(format!("pattern lacks diagonal entry {k}")))?;
            out.values[pos] += dk;
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { pattern: Arc::clone(&self.pattern), values: self.values.iter().map(|v| c * v).collect() }
    }
}
