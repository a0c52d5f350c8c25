//! Compressed sparse column storage and the handful of kernels the solvers
//! need: sparse x dense, sparse^T x dense, and the congruence G^T S G.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds from (row, col, value) triplets. Duplicate coordinates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[c];
            rows[k] = r;
            vals[k] = v;
            next[c] += 1;
        }
        // sort each column by row and merge duplicates
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        col_ptr.push(0);
        for c in 0..ncols {
            let mut entries: Vec<(usize, f64)> = (counts[c]..counts[c + 1])
                .map(|k| (rows[k], vals[k]))
                .collect();
            entries.sort_by_key(|e| e.0);
            for (r, v) in entries {
                if row_idx.len() > col_ptr[c] && *row_idx.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
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

    /// Row indices and values of column `c`.
    pub fn column(&self, c: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            let (rows, vals) = self.column(c);
            rows.iter().zip(vals).map(move |(&r, &v)| (r, c, v))
        })
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|c| self.column(c).1.iter().sum())
            .collect()
    }

    /// Induced 1-norm: the largest absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.ncols)
            .map(|c| self.column(c).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> CscMatrix {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        CscMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            out[(r, c)] += v;
        }
        out
    }

    /// `self * x`, with `x` of shape ncols x m.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for k in 0..x.ncols() {
            let xk = x.column(k);
            let mut ok = out.column_mut(k);
            for c in 0..self.ncols {
                let xc = xk[c];
                if xc == 0.0 {
                    continue;
                }
                let (rows, vals) = self.column(c);
                for (&r, &v) in rows.iter().zip(vals) {
                    ok[r] += v * xc;
                }
            }
        }
        out
    }

    /// `self^T * y`, with `y` of shape nrows x m.
    pub fn tr_mul_dense(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(y.nrows(), self.nrows);
        let mut out = DMatrix::zeros(self.ncols, y.ncols());
        for k in 0..y.ncols() {
            let yk = y.column(k);
            for c in 0..self.ncols {
                let (rows, vals) = self.column(c);
                out[(c, k)] = rows.iter().zip(vals).map(|(&r, &v)| v * yk[r]).sum();
            }
        }
        out
    }

    /// The congruence `G^T S G` for a dense symmetric `S` (nrows x nrows).
    /// Only the upper triangle is evaluated and then mirrored, so the result
    /// is exactly symmetric.
    pub fn congruence(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(s.nrows(), self.nrows);
        assert_eq!(s.ncols(), self.nrows);
        let n = self.ncols;
        // y = S G, column a of y is a combination of columns of S
        let mut y = DMatrix::zeros(self.nrows, n);
        for a in 0..n {
            let (rows, vals) = self.column(a);
            let mut ya = y.column_mut(a);
            for (&c, &v) in rows.iter().zip(vals) {
                ya.axpy(v, &s.column(c), 1.0);
            }
        }
        let mut out = DMatrix::zeros(n, n);
        for b in 0..n {
            let yb = y.column(b);
            for a in 0..=b {
                let (rows, vals) = self.column(a);
                let v: f64 = rows.iter().zip(vals).map(|(&c, &g)| g * yb[c]).sum();
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        out
    }
}

/// Counts how many stored entries a kernel visited. Used by tests to check
/// matrix-free operators touch each edge a bounded number of times.
#[derive(Debug, Default)]
pub struct VisitCounter(AtomicU64);

impl VisitCounter {
    pub fn add(&self, n: usize) {
        self.0.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}
