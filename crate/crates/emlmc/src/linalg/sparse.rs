//! Compressed sparse row matrices: symmetric SPD operators and rectangular
//! coupling/transfer blocks.

use crate::error::Error;
use crate::linalg::RhsBlock;
use crate::Result;

/// Accumulates `(row, col, value)` triplets and compresses them into CSR.
///
/// Duplicate entries are summed in insertion order (stable sort), so assembly
/// is bit-for-bit deterministic for a fixed element traversal.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    triplets: Vec<(u32, u32, f64)>,
}

impl TripletBuilder {
    /// New builder for an `n_rows x n_cols` matrix.
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        assert!(n_rows < u32::MAX as usize && n_cols < u32::MAX as usize);
        TripletBuilder { n_rows, n_cols, triplets: Vec::new() }
    }

    /// Adds `value` at `(row, col)`.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.triplets.push((row as u32, col as u32, value));
    }

    fn compress(mut self) -> (Vec<usize>, Vec<u32>, Vec<f64>) {
        self.triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for (r, c, v) in self.triplets {
            if col_idx.len() > row_ptr[r as usize]
                && *col_idx.last().unwrap() == c
                && row_ptr[r as usize + 1] == col_idx.len()
            {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r as usize + 1] = col_idx.len();
            }
        }
        // Fill row pointers for trailing empty rows.
        for r in 0..self.n_rows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        let mut running = 0;
        for r in 0..self.n_rows {
            running = running.max(row_ptr[r + 1]);
            row_ptr[r + 1] = running;
        }
        (row_ptr, col_idx, vals)
    }

    /// Compresses into a square symmetric operator.
    pub fn build_spd(self) -> SpdOperator {
        assert_eq!(self.n_rows, self.n_cols, "SPD operator must be square");
        let n = self.n_rows;
        let (row_ptr, col_idx, vals) = self.compress();
        SpdOperator { n, row_ptr, col_idx, vals }
    }

    /// Compresses into a rectangular sparse matrix.
    pub fn build_rect(self) -> SparseRect {
        let (rows, cols) = (self.n_rows, self.n_cols);
        let (row_ptr, col_idx, vals) = self.compress();
        SparseRect { rows, cols, row_ptr, col_idx, vals }
    }
}

/// A square symmetric positive (semi)definite operator in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
}

impl SpdOperator {
    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Sparse identity of dimension `n`.
    pub fn identity(n: usize) -> Self {
        SpdOperator {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            vals: vec![1.0; n],
        }
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
    }

    /// Returns `A x` as a fresh vector.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Applies the operator column-by-column to a block.
    pub fn matvec_block(&self, x: &RhsBlock) -> RhsBlock {
        debug_assert_eq!(x.rows(), self.n);
        let mut out = RhsBlock::zeros(self.n, x.cols());
        for j in 0..x.cols() {
            let (src, dst) = (x.col(j), out.col_mut(j));
            for r in 0..self.n {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * src[self.col_idx[k] as usize];
                }
                dst[r] = acc;
            }
        }
        out
    }

    /// Quadratic form `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.n {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * x[self.col_idx[k] as usize];
            }
            acc += x[r] * row;
        }
        acc
    }

    /// Main diagonal (zeros for rows without a stored diagonal entry).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] as usize == r {
                    d[r] = self.vals[k];
                }
            }
        }
        d
    }

    /// `alpha * self + beta * other` for operators with identical sparsity.
    pub fn linear_combination(&self, alpha: f64, other: &SpdOperator, beta: f64) -> Result<SpdOperator> {
        if self.n != other.n || self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::DimensionMismatch {
                detail: "linear combination requires identical sparsity patterns".into(),
            });
        }
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(SpdOperator {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals,
        })
    }

    /// Maximum absolute entrywise difference; requires identical patterns.
    pub fn max_abs_diff(&self, other: &SpdOperator) -> Result<f64> {
        if self.n != other.n || self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::DimensionMismatch {
                detail: "entrywise comparison requires identical sparsity patterns".into(),
            });
        }
        Ok(self
            .vals
            .iter()
            .zip(&other.vals)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// True when the stored matrix is symmetric to `tol` (test helper).
    pub fn is_symmetric(&self, tol: f64) -> bool {
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                let v = self.vals[k];
                let mirror = self.entry(c, r);
                if (v - mirror).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Stored entry at `(row, col)` or 0 when absent.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        for k in self.row_ptr[row]..self.row_ptr[row + 1] {
            if self.col_idx[k] as usize == col {
                return self.vals[k];
            }
        }
        0.0
    }

    /// Dense row-major copy (for dense factorization and test oracles).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                dense[r * self.n + self.col_idx[k] as usize] = self.vals[k];
            }
        }
        dense
    }

    /// Principal submatrix on the (ascending) index set `keep`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> SpdOperator {
        let map = index_map(self.n, keep);
        let mut builder = TripletBuilder::new(keep.len(), keep.len());
        for (local_r, &r) in keep.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                if let Some(local_c) = map[c] {
                    builder.add(local_r, local_c, self.vals[k]);
                }
            }
        }
        builder.build_spd()
    }

    /// Rectangular submatrix with the given row and column index sets.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseRect {
        let map = index_map(self.n, cols);
        let mut builder = TripletBuilder::new(rows.len(), cols.len());
        for (local_r, &r) in rows.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                if let Some(local_c) = map[c] {
                    builder.add(local_r, local_c, self.vals[k]);
                }
            }
        }
        builder.build_rect()
    }
}

fn index_map(n: usize, keep: &[usize]) -> Vec<Option<usize>> {
    let mut map = vec![None; n];
    for (local, &global) in keep.iter().enumerate() {
        map[global] = Some(local);
    }
    map
}

/// A rectangular sparse matrix in CSR form.
#[derive(Debug, Clone)]
pub struct SparseRect {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseRect {
    /// Row count.
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    /// Column count.
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
        y
    }

    /// Largest number of stored entries in any row.
    pub fn max_row_entries(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// Applies the matrix to every column of a block.
    pub fn matvec_block(&self, x: &RhsBlock) -> RhsBlock {
        debug_assert_eq!(x.rows(), self.cols);
        let mut out = RhsBlock::zeros(self.rows, x.cols());
        for j in 0..x.cols() {
            let (src, dst) = (x.col(j), out.col_mut(j));
            for r in 0..self.rows {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * src[self.col_idx[k] as usize];
                }
                dst[r] = acc;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spd() -> SpdOperator {
        // [[4, 1, 0], [1, 3, 1], [0, 1, 2]]
        let mut b = TripletBuilder::new(3, 3);
        for (r, c, v) in [
            (0, 0, 4.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 1, 3.0),
            (1, 2, 1.0),
            (2, 1, 1.0),
            (2, 2, 2.0),
        ] {
            b.add(r, c, v);
        }
        b.build_spd()
    }

    #[test]
    fn duplicate_triplets_are_summed_in_order() {
        let mut b = TripletBuilder::new(2, 2);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.0);
        b.add(1, 1, 5.0);
        b.add(0, 1, 0.5);
        b.add(1, 0, 0.5);
        let a = b.build_spd();
        assert_eq!(a.entry(0, 0), 3.0);
        assert_eq!(a.entry(0, 1), 0.5);
        assert_eq!(a.nnz(), 4);
        assert!(a.is_symmetric(0.0));
    }

    #[test]
    fn matvec_matches_dense_reference() {
        let a = small_spd();
        let x = [1.0, -2.0, 3.0];
        let y = a.matvec(&x);
        assert_eq!(y, vec![2.0, -2.0, 4.0]);
        assert!((a.quadratic_form(&x) - (2.0 - 2.0 * -2.0 + 3.0 * 4.0)).abs() <= 1e-15);
    }

    #[test]
    fn quadratic_form_positive_for_random_vectors() {
        let a = small_spd();
        // Simple deterministic probe vectors.
        for seed in 1..20u64 {
            let x: Vec<f64> = (0..3)
                .map(|i| ((seed.wrapping_mul(6364136223846793005).wrapping_add(i)) % 1000) as f64 / 500.0 - 1.0)
                .collect();
            if x.iter().any(|&v| v != 0.0) {
                assert!(a.quadratic_form(&x) > 0.0);
            }
        }
    }

    #[test]
    fn linear_combination_requires_matching_pattern_and_is_exact() {
        let a = small_spd();
        let b = a.linear_combination(2.0, &a, 3.0).unwrap();
        assert_eq!(b.entry(0, 0), 20.0);
        assert_eq!(b.entry(1, 2), 5.0);
        let id = SpdOperator::identity(3);
        assert!(a.linear_combination(1.0, &id, 1.0).is_err());
    }

    #[test]
    fn submatrices_match_dense_reference() {
        let a = small_spd();
        let sub = a.principal_submatrix(&[0, 2]);
        assert_eq!(sub.dim(), 2);
        assert_eq!(sub.entry(0, 0), 4.0);
        assert_eq!(sub.entry(0, 1), 0.0);
        assert_eq!(sub.entry(1, 1), 2.0);
        let rect = a.submatrix(&[1], &[0, 2]);
        assert_eq!(rect.matvec(&[1.0, 1.0]), vec![2.0]);
    }
}
