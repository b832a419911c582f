//! Compressed sparse row operator used for all assembled forms.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::{Error, Result};

/// Which degree-of-freedom set a matrix side indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Edge,
    Cell,
    Node,
    Generic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    pub row_kind: DofKind,
    pub col_kind: DofKind,
}

impl SparseOperator {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        row_kind: DofKind,
        col_kind: DofKind,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator { nrows, ncols, row_ptr, col_idx, values, row_kind, col_kind }
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

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// Bilinear form `x^T A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Product with every column of a dense matrix.
    pub fn mul_dense(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut y = Mat::<f64>::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            for r in 0..self.nrows {
                let (cols, vals) = self.row(r);
                let mut s = 0.0;
                for (&c, &v) in cols.iter().zip(vals) {
                    s += v * x[(c, j)];
                }
                y[(r, j)] = s;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseOperator {
        let t = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        SparseOperator::from_triplets(self.ncols, self.nrows, t, self.col_kind, self.row_kind)
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &SparseOperator, s: f64) -> Result<SparseOperator> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let t = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, s * v)))
            .collect();
        Ok(SparseOperator::from_triplets(self.nrows, self.ncols, t, self.row_kind, self.col_kind))
    }

    /// Product `self * other` of two sparse operators.
    pub fn matmul(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.ncols != other.nrows {
            return Err(Error::InvalidInput("dimension mismatch in sparse product".into()));
        }
        let mut t = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&k, &a) in cols.iter().zip(vals) {
                let (cols2, vals2) = other.row(k);
                for (&c, &b) in cols2.iter().zip(vals2) {
                    t.push((r, c, a * b));
                }
            }
        }
        Ok(SparseOperator::from_triplets(self.nrows, other.ncols, t, self.row_kind, other.col_kind))
    }

    /// Extracts the rows and columns listed, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseOperator {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Vec::new();
        for (kr, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    t.push((kr, col_map[c], v));
                }
            }
        }
        SparseOperator::from_triplets(rows.len(), cols.len(), t, self.row_kind, self.col_kind)
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let t: Vec<_> = self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .expect("indices are in bounds by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = SparseOperator::from_triplets(
            2,
            3,
            vec![(0, 1, 1.0), (1, 2, 4.0), (0, 1, 2.0), (1, 0, -1.0)],
            DofKind::Generic,
            DofKind::Generic,
        );
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(a.mul_transpose_vec(&[1.0, 2.0]), vec![-2.0, 3.0, 8.0]);
        let t = a.transpose();
        assert_eq!(t.get(1, 0), 3.0);
        let s = a.submatrix(&[1], &[2, 0]);
        assert_eq!(s.to_dense()[(0, 0)], 4.0);
        assert_eq!(s.to_dense()[(0, 1)], -1.0);
    }

    #[test]
    fn product_matches_dense() {
        let a = SparseOperator::from_triplets(
            2,
            2,
            vec![(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)],
            DofKind::Generic,
            DofKind::Generic,
        );
        let p = a.matmul(&a.transpose()).unwrap().to_dense();
        let d = a.to_dense();
        let want = &d * d.transpose();
        assert!((&p - &want).norm_max() < 1e-15);
    }
}
