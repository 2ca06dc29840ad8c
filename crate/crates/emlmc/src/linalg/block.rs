//! Dense column-major blocks of right-hand sides / solution columns.

/// A dense `rows x cols` matrix stored column-major, one column per ensemble
/// member, so per-column vector operations run on contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsBlock {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RhsBlock {
    /// Zero block.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RhsBlock { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a block from column vectors (all of equal length).
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            assert_eq!(c.len(), rows, "ragged columns");
            data.extend_from_slice(c);
        }
        RhsBlock { rows, cols, data }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column `j` as a slice.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Column `j` as a mutable slice.
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Entry accessor.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// Entry setter.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    /// Two mutable column views (for in-place column recurrences).
    pub fn cols_pair_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        assert!(a != b);
        let rows = self.rows;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (left, right) = self.data.split_at_mut(hi * rows);
        let first = &mut left[lo * rows..(lo + 1) * rows];
        let second = &mut right[..rows];
        if a < b {
            (first, second)
        } else {
            (second, first)
        }
    }

    /// Euclidean norm of column `j`.
    pub fn col_norm(&self, j: usize) -> f64 {
        self.col(j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry across the whole block.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference with another block of equal shape.
    pub fn max_abs_diff(&self, other: &RhsBlock) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Mean of all columns (in ascending column order, deterministic).
    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.rows];
        for j in 0..self.cols {
            let c = self.col(j);
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v;
            }
        }
        let inv = 1.0 / self.cols as f64;
        for m in &mut mean {
            *m *= inv;
        }
        mean
    }

    /// Raw storage (column-major), for bit-level comparisons in tests.
    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Mutable raw storage; columns are contiguous `rows`-sized chunks, so
    /// per-column parallel writes stay disjoint.
    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}
