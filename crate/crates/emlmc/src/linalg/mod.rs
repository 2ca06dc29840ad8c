//! Sparse and dense linear algebra for the shared-matrix ensemble solves.
//!
//! One ensemble group contributes a single SPD system matrix and a block of
//! right-hand sides (one column per sample).  The block is solved either by
//! block conjugate gradients with per-column deflation or by a dense Cholesky
//! factorization that is reused across all columns and time steps.

mod block;
mod block_cg;
mod cholesky;
mod solver;
mod sparse;

pub use block::RhsBlock;
pub use block_cg::{solve_block_cg, BlockCgOptions, BlockCgReport};
pub use cholesky::{DenseCholesky, DENSE_DIM_LIMIT};
pub use solver::{PreparedSolver, SolveInfo, SolverChoice};
pub use sparse::{SparseRect, SpdOperator, TripletBuilder};
