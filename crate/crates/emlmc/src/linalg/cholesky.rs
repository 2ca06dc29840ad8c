//! Dense Cholesky factorization for the direct-solver path.
//!
//! The shared ensemble matrix of a group is factored once and the factor is
//! reused for every member column at every time step, which is the whole point
//! of the shared-coefficient scheme.  Desk-scale systems stay below a guarded
//! dimension where dense work is acceptable.

use crate::error::Error;
use crate::linalg::{RhsBlock, SpdOperator};
use crate::Result;
use rayon::prelude::*;

/// Largest dimension accepted for dense factorization.
pub const DENSE_DIM_LIMIT: usize = 8192;

/// Row count below which the trailing update is not worth parallelizing.
const PAR_UPDATE_CUTOFF: usize = 192;

/// A lower-triangular Cholesky factor `A = L L^T`, stored as full row-major.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    /// Row-major storage; only the lower triangle (incl. diagonal) is meaningful.
    l: Vec<f64>,
}

impl DenseCholesky {
    /// Factors a sparse SPD operator densely.
    pub fn factor(a: &SpdOperator) -> Result<Self> {
        if a.dim() > DENSE_DIM_LIMIT {
            return Err(Error::DenseDimensionGuard { dim: a.dim(), limit: DENSE_DIM_LIMIT });
        }
        Self::factor_rows(a.dim(), a.to_dense())
    }

    /// Factors a dense row-major symmetric matrix (the lower triangle is read).
    pub fn factor_rows(n: usize, mut m: Vec<f64>) -> Result<Self> {
        if n > DENSE_DIM_LIMIT {
            return Err(Error::DenseDimensionGuard { dim: n, limit: DENSE_DIM_LIMIT });
        }
        assert_eq!(m.len(), n * n);
        let mut column = vec![0.0; n];
        for k in 0..n {
            let pivot = m[k * n + k];
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot, index: k });
            }
            let root = pivot.sqrt();
            m[k * n + k] = root;
            let inv = 1.0 / root;
            for i in (k + 1)..n {
                m[i * n + k] *= inv;
                column[i] = m[i * n + k];
            }
            // Trailing update: row i of the lower triangle loses
            // column[i] * column[j] for j in (k+1)..=i.  Rows are disjoint,
            // so the update parallelizes without changing any result bit.
            let tail = n - (k + 1);
            if tail == 0 {
                continue;
            }
            let col = &column;
            let update_row = |i: usize, row: &mut [f64]| {
                let li = col[i];
                if li != 0.0 {
                    for j in (k + 1)..=i {
                        row[j] -= li * col[j];
                    }
                }
            };
            if tail >= PAR_UPDATE_CUTOFF {
                m[(k + 1) * n..]
                    .par_chunks_mut(n)
                    .enumerate()
                    .for_each(|(off, row)| update_row(k + 1 + off, row));
            } else {
                for i in (k + 1)..n {
                    let row = &mut m[i * n..(i + 1) * n];
                    update_row(i, row);
                }
            }
        }
        Ok(DenseCholesky { n, l: m })
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        // Forward substitution L y = b (row-contiguous dot products).
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut acc = x[i];
            for (lij, xj) in row.iter().zip(x.iter()) {
                acc -= lij * xj;
            }
            x[i] = acc / self.l[i * n + i];
        }
        // Backward substitution L^T x = y, in saxpy form so the accesses stay
        // on contiguous rows of L.
        for j in (0..n).rev() {
            x[j] /= self.l[j * n + j];
            let xj = x[j];
            if xj != 0.0 {
                let row = &self.l[j * n..j * n + j];
                for (xi, lji) in x[..j].iter_mut().zip(row) {
                    *xi -= lji * xj;
                }
            }
        }
    }

    /// Solves `A x = b` into a fresh vector.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for every column of a block (columns are independent).
    pub fn solve_block(&self, b: &RhsBlock) -> RhsBlock {
        let mut x = b.clone();
        let n = self.n;
        if b.cols() >= 4 && n >= 256 {
            let cols: Vec<Vec<f64>> = (0..b.cols())
                .into_par_iter()
                .map(|j| self.solve_vec(b.col(j)))
                .collect();
            x = RhsBlock::from_columns(&cols);
        } else {
            for j in 0..b.cols() {
                self.solve_in_place(x.col_mut(j));
            }
        }
        debug_assert_eq!(x.rows(), n);
        x
    }
}
