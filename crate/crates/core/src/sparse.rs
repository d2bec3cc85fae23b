//! Compressed sparse row storage and the handful of kernels the propagation
//! backbone needs: construction from triplets, sparse × dense products,
//! symmetric degree normalization and transposition.
//!
//! All values are `f64`. Every constructor returns a matrix in canonical form
//! (strictly increasing column indices within each row).

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this many output scalars `spmm` stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// An `n_rows × n_cols` matrix with no stored entries.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a canonical matrix from `(row, col, value)` triplets in any order.
    ///
    /// Out-of-range indices and repeated `(row, col)` pairs are rejected.
    pub fn from_coo(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in entries {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Structural(format!(
                    "entry ({r}, {c}) outside {n_rows}x{n_cols} matrix"
                )));
            }
            counts[r + 1] += 1;
        }
        for r in 0..n_rows {
            counts[r + 1] += counts[r];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut slots: Vec<(usize, f64)> = vec![(0, 0.0); entries.len()];
        for &(r, c, v) in entries {
            slots[next[r]] = (c, v);
            next[r] += 1;
        }
        for r in 0..n_rows {
            let row = &mut slots[row_offsets[r]..row_offsets[r + 1]];
            row.sort_unstable_by_key(|&(c, _)| c);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Structural(format!(
                    "duplicate entry at ({r}, {})",
                    w[0].0
                )));
            }
        }
        let (col_indices, values) = slots.into_iter().unzip();
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    /// Stored value at `(r, c)`, or 0.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// Iterates stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (r, c, v) in self.triplets() {
            out[[r, c]] = v;
        }
        out
    }

    /// Sum of each row.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// Checks the canonical-form invariants.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Structural(m));
        if self.row_offsets.len() != self.n_rows + 1 || self.row_offsets[0] != 0 {
            return fail("row offsets malformed".into());
        }
        if self.row_offsets[self.n_rows] != self.col_indices.len()
            || self.col_indices.len() != self.values.len()
        {
            return fail("row offsets do not match entry count".into());
        }
        for r in 0..self.n_rows {
            if self.row_offsets[r] > self.row_offsets[r + 1] {
                return fail(format!("row offsets decrease at row {r}"));
            }
            let (cols, _) = self.row(r);
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return fail(format!("row {r} not strictly increasing"));
            }
            if cols.last().is_some_and(|&c| c >= self.n_cols) {
                return fail(format!("row {r} has column out of range"));
            }
        }
        Ok(())
    }

    /// Returns a copy keeping only the entries for which `keep` is true.
    /// `keep` is called once per stored entry in row-major order.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> CsrMatrix {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if keep(r, c, v) {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// `self · x` for a dense `x` with `n_cols` rows.
    ///
    /// Each output row is produced by exactly one task, so the result is
    /// bitwise identical for any thread count.
    pub fn spmm(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.n_cols {
            return Err(Error::Structural(format!(
                "spmm: matrix has {} columns but operand has {} rows",
                self.n_cols,
                x.nrows()
            )));
        }
        let d = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.n_rows * d];
        let fill = |(r, dst): (usize, &mut [f64])| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let src = &xs[c * d..(c + 1) * d];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        };
        if d > 0 {
            if self.n_rows * d >= PAR_THRESHOLD {
                out.par_chunks_mut(d).enumerate().for_each(fill);
            } else {
                out.chunks_mut(d).enumerate().for_each(fill);
            }
        }
        Ok(Array2::from_shape_vec((self.n_rows, d), out).expect("shape"))
    }

    /// `D^(-1/2) A D^(-1/2)` with `D` the row sums. Zero-degree rows and
    /// columns come out empty.
    pub fn normalize_sym(&self) -> Result<CsrMatrix> {
        if self.n_rows != self.n_cols {
            return Err(Error::Structural(format!(
                "normalize_sym needs a square matrix, got {}x{}",
                self.n_rows, self.n_cols
            )));
        }
        if let Some((r, c, v)) = self.triplets().find(|&(_, _, v)| v < 0.0 || v.is_nan()) {
            return Err(Error::Structural(format!(
                "normalize_sym: negative value {v} at ({r}, {c})"
            )));
        }
        let inv_sqrt: Vec<f64> = self
            .row_sums()
            .into_iter()
            .map(|deg| if deg > 0.0 { 1.0 / deg.sqrt() } else { 0.0 })
            .collect();
        let mut out = self.filter(|r, c, _| inv_sqrt[r] > 0.0 && inv_sqrt[c] > 0.0);
        for r in 0..out.n_rows {
            let span = out.row_offsets[r]..out.row_offsets[r + 1];
            for k in span {
                let c = out.col_indices[k];
                out.values[k] *= inv_sqrt[r] * inv_sqrt[c];
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            counts[c + 1] += counts[c];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Row-major traversal keeps each output row sorted.
        for (r, c, v) in self.triplets() {
            col_indices[next[c]] = r;
            values[next[c]] = v;
            next[c] += 1;
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// True when the stored pattern and values are exactly symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.transpose() == *self
    }
}
