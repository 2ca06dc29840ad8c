//! A prepared linear solver: one shared SPD matrix, many right-hand sides.

use crate::linalg::{solve_block_cg, BlockCgOptions, DenseCholesky, RhsBlock, SpdOperator};
use crate::Result;

/// Which algorithm solves the shared system of an ensemble group.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    /// Block conjugate gradients over all member columns at once.
    BlockCg { tol: f64, jacobi_scaling: bool },
    /// Plain conjugate gradients, one column at a time.
    ColumnCg { tol: f64, jacobi_scaling: bool },
    /// Dense Cholesky factorization, reused across steps and columns.
    Cholesky,
}

impl SolverChoice {
    /// Default iterative tolerance used by the experiment drivers.
    pub const DEFAULT_TOL: f64 = 1e-10;

    /// Block CG at the default tolerance.
    pub fn block_cg() -> Self {
        SolverChoice::BlockCg { tol: Self::DEFAULT_TOL, jacobi_scaling: false }
    }

    /// Column-by-column CG at the default tolerance.
    pub fn column_cg() -> Self {
        SolverChoice::ColumnCg { tol: Self::DEFAULT_TOL, jacobi_scaling: false }
    }
}

/// Diagnostics of one block solve.
#[derive(Debug, Clone, Default)]
pub struct SolveInfo {
    /// Iterations used (0 for the direct path).
    pub iterations: usize,
    /// Worst per-column relative residual reported by the solver.
    pub worst_relative_residual: f64,
}

/// A solver bound to one system matrix (factored once for the direct path).
pub enum PreparedSolver<'a> {
    Iterative { matrix: &'a SpdOperator, options: BlockCgOptions, by_column: bool },
    Direct { factor: DenseCholesky },
}

impl<'a> PreparedSolver<'a> {
    /// Prepares the chosen solver for `matrix` (factors it for `Cholesky`).
    pub fn prepare(matrix: &'a SpdOperator, choice: &SolverChoice) -> Result<Self> {
        match choice {
            SolverChoice::BlockCg { tol, jacobi_scaling } => Ok(PreparedSolver::Iterative {
                matrix,
                options: BlockCgOptions { tol: *tol, max_iter: None, jacobi_scaling: *jacobi_scaling },
                by_column: false,
            }),
            SolverChoice::ColumnCg { tol, jacobi_scaling } => Ok(PreparedSolver::Iterative {
                matrix,
                options: BlockCgOptions { tol: *tol, max_iter: None, jacobi_scaling: *jacobi_scaling },
                by_column: true,
            }),
            SolverChoice::Cholesky => Ok(PreparedSolver::Direct { factor: DenseCholesky::factor(matrix)? }),
        }
    }

    /// Solves the bound system for a block of right-hand sides.
    pub fn solve_block(&self, b: &RhsBlock) -> Result<(RhsBlock, SolveInfo)> {
        match self {
            PreparedSolver::Direct { factor } => {
                let x = factor.solve_block(b);
                Ok((x, SolveInfo::default()))
            }
            PreparedSolver::Iterative { matrix, options, by_column: false } => {
                let (x, report) = solve_block_cg(matrix, b, options)?;
                Ok((
                    x,
                    SolveInfo {
                        iterations: report.iterations,
                        worst_relative_residual: report.worst_relative_residual,
                    },
                ))
            }
            PreparedSolver::Iterative { matrix, options, by_column: true } => {
                let mut cols = Vec::with_capacity(b.cols());
                let mut info = SolveInfo::default();
                for j in 0..b.cols() {
                    let single = RhsBlock::from_columns(&[b.col(j).to_vec()]);
                    let (x, report) = solve_block_cg(matrix, &single, options)?;
                    info.iterations = info.iterations.max(report.iterations);
                    info.worst_relative_residual =
                        info.worst_relative_residual.max(report.worst_relative_residual);
                    cols.push(x.col(0).to_vec());
                }
                Ok((RhsBlock::from_columns(&cols), info))
            }
        }
    }
}
