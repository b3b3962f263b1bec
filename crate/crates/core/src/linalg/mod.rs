//! Sparse complex operators and the banded direct solvers used by the
//! field and structure solves.

mod banded;

pub use banded::{BandedCholesky, BandedLu};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Complex sparse matrix in compressed-row form.
///
/// Duplicate `(row, col)` entries passed to [`SparseLinearOperator::from_triplets`]
/// are summed. Explicit zeros produced by that summation are kept so that the
/// sparsity pattern of an operator does not depend on the values it was
/// assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLinearOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseLinearOperator {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} operator"
                )));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterator over the stored `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Value at `(r, c)`, zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    fn check_len(&self, got: usize, want: usize, what: &str) -> Result<()> {
        if got != want {
            return Err(Error::DimensionMismatch(format!(
                "{what}: vector of length {got}, operator is {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len(x.len(), self.cols, "apply")?;
        Ok((0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect())
    }

    /// `y = Aᵀ x` (no conjugation).
    pub fn apply_transpose(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len(x.len(), self.rows, "apply_transpose")?;
        let mut y = vec![C64::default(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        Ok(y)
    }

    /// `y = Aᴴ x`.
    pub fn apply_adjoint(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len(x.len(), self.rows, "apply_adjoint")?;
        let mut y = vec![C64::default(); self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v.conj() * xr;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.triplets().map(|(r, c, v)| (c, r, v)))
            .expect("transpose keeps indices in range")
    }

    /// Product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul of {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut triplets = Vec::with_capacity(self.nnz() * 2);
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    triplets.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.rows, rhs.cols, triplets)
    }

    /// `diag(left) * self * diag(right)`, either side optional.
    pub fn scaled(&self, left: Option<&[C64]>, right: Option<&[C64]>) -> Result<Self> {
        if let Some(l) = left {
            self.check_len(l.len(), self.rows, "row scaling")?;
        }
        if let Some(rs) = right {
            self.check_len(rs.len(), self.cols, "column scaling")?;
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let mut v = out.values[k];
                if let Some(l) = left {
                    v *= l[r];
                }
                if let Some(rs) = right {
                    v *= rs[c];
                }
                out.values[k] = v;
            }
        }
        Ok(out)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, other: &Self, alpha: C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "sum of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Self::from_triplets(
            self.rows,
            self.cols,
            self.triplets()
                .chain(other.triplets().map(|(r, c, v)| (r, c, alpha * v))),
        )
    }

    /// Keep only the listed rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let triplets = rows
            .iter()
            .enumerate()
            .flat_map(|(new_r, &r)| self.row(r).map(move |(c, v)| (new_r, c, v)));
        Self::from_triplets(rows.len(), self.cols, triplets).expect("row selection in range")
    }

    /// Keep only the listed columns, renumbered in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.cols];
        for (new_c, &c) in cols.iter().enumerate() {
            map[c] = new_c;
        }
        let triplets = self
            .triplets()
            .filter(|&(_, c, _)| map[c] != usize::MAX)
            .map(|(r, c, v)| (r, map[c], v));
        Self::from_triplets(self.rows, cols.len(), triplets).expect("column selection in range")
    }

    /// Dense copy, row-major. Intended for tests and tiny systems.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut d = vec![vec![C64::default(); self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            d[r][c] += v;
        }
        d
    }

    /// Largest `|a_ij|` over stored entries.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Lower and upper bandwidth of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (r, c, _) in self.triplets() {
            if c < r {
                kl = kl.max(r - c);
            } else {
                ku = ku.max(c - r);
            }
        }
        (kl, ku)
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `Σ conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseLinearOperator::from_triplets(2, 2, [(0, 1, c(1.0)), (0, 1, c(2.5)), (1, 0, c(-1.0))])
            .unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), c(3.5));
        assert_eq!(a.get(1, 1), c(0.0));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseLinearOperator::from_triplets(2, 2, [(2, 0, c(1.0))]).is_err());
    }

    #[test]
    fn transpose_product_matches_transpose_operator() {
        let a = SparseLinearOperator::from_triplets(
            3,
            2,
            [(0, 0, C64::new(1.0, 2.0)), (2, 1, C64::new(-3.0, 0.5)), (1, 0, c(4.0))],
        )
        .unwrap();
        let x = vec![C64::new(0.3, -1.0), c(2.0), C64::new(0.0, 1.0)];
        assert_eq!(a.apply_transpose(&x).unwrap(), a.transpose().apply(&x).unwrap());
        let adj = a.apply_adjoint(&x).unwrap();
        let manual: Vec<C64> = (0..2)
            .map(|j| (0..3).map(|i| a.get(i, j).conj() * x[i]).sum())
            .collect();
        assert_eq!(adj, manual);
    }

    #[test]
    fn matmul_against_dense() {
        let a = SparseLinearOperator::from_triplets(2, 3, [(0, 0, c(1.0)), (0, 2, c(2.0)), (1, 1, c(3.0))])
            .unwrap();
        let b = SparseLinearOperator::from_triplets(3, 2, [(0, 1, c(5.0)), (2, 0, c(-1.0)), (1, 0, c(2.0))])
            .unwrap();
        let p = a.matmul(&b).unwrap().to_dense();
        assert_eq!(p[0][0], c(-2.0));
        assert_eq!(p[0][1], c(5.0));
        assert_eq!(p[1][0], c(6.0));
        assert_eq!(p[1][1], c(0.0));
    }
}
