//! Compressed sparse row matrices.

use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists. Entries with the
    /// same column in one row are summed; exact zeros are kept.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                assert!(c < ncols, "column {c} out of range");
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn from_dense(nrows: usize, ncols: usize, a: &[f64]) -> Self {
        let rows = (0..nrows)
            .map(|i| (0..ncols).filter(|&j| a[i * ncols + j] != 0.0).map(|j| (j, a[i * ncols + j])).collect())
            .collect();
        Self::from_rows(ncols, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Column indices and values of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, a)| a * x[j]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Rows that store no entries at all.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.nrows).filter(|&i| self.row_ptr[i] == self.row_ptr[i + 1]).collect()
    }

    /// Columns that no row references.
    pub fn empty_cols(&self) -> Vec<usize> {
        let mut seen = vec![false; self.ncols];
        self.cols.iter().for_each(|&c| seen[c] = true);
        (0..self.ncols).filter(|&c| !seen[c]).collect()
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.nrows * self.ncols];
        for (i, j, v) in self.triplets() {
            a[i * self.ncols + j] = v;
        }
        a
    }

    /// Coordinate text format: a size line, then `row col value` per entry,
    /// 0-based.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "% rows cols nnz")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

/// `‖A x − b‖₂ / ‖b‖₂`, or `‖A x‖₂` when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let nb = norm2(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_sorted_and_merged() {
        let m = CsrMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 2.0), (2, 0.5)], vec![], vec![(1, -1.0)]]);
        assert_eq!(m.row(0), (&[0usize, 2][..], &[2.0, 1.5][..]));
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.empty_rows(), vec![1]);
        assert_eq!(m.get(2, 1), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul(&[1.0, 2.0, 3.0]), vec![6.5, 0.0, -2.0]);
    }

    #[test]
    fn triplet_text() {
        let m = CsrMatrix::from_rows(2, vec![vec![(0, 1.0)], vec![(1, 2.5)]]);
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "% rows cols nnz\n2 2 2\n0 0 1e0\n1 1 2.5e0\n");
    }
}
