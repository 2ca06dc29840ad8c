//! Block conjugate gradients with residual orthonormalization.
//!
//! Solves `A X = B` for a block of right-hand sides at once.  The residual
//! block is kept in factored form `R = Q C` with `Q` orthonormal (modified
//! Gram-Schmidt with a drop tolerance), so linearly dependent right-hand
//! sides shrink the search-basis width instead of breaking the iteration,
//! and per-column residual norms are read off `C` for free.  Columns whose
//! relative residual reaches the tolerance are frozen and leave the block.

use crate::error::Error;
use crate::linalg::{DenseCholesky, RhsBlock, SpdOperator};
use crate::Result;

/// Drop tolerance of the modified Gram-Schmidt orthonormalization: a column
/// whose remainder falls below this fraction of its pre-projection norm is
/// treated as linearly dependent and deflated.
pub const MGS_DROP_TOL: f64 = 1e-13;

/// Options for [`solve_block_cg`].
#[derive(Debug, Clone)]
pub struct BlockCgOptions {
    /// Per-column relative residual target `||b_j - A x_j|| <= tol * ||b_j||`.
    pub tol: f64,
    /// Iteration cap; defaults to `10 * dim` when `None`.
    pub max_iter: Option<usize>,
    /// Symmetric diagonal (Jacobi) scaling of the system before iterating.
    pub jacobi_scaling: bool,
}

impl Default for BlockCgOptions {
    fn default() -> Self {
        BlockCgOptions { tol: 1e-10, max_iter: None, jacobi_scaling: false }
    }
}

/// Convergence report of a block solve.
#[derive(Debug, Clone)]
pub struct BlockCgReport {
    /// Number of block iterations performed.
    pub iterations: usize,
    /// Width of the search basis at the first iteration.
    pub initial_block_width: usize,
    /// Worst true relative residual over all columns after the solve.
    pub worst_relative_residual: f64,
}

/// Solves `A X = B` by block CG; returns the solution block and a report.
pub fn solve_block_cg(
    a: &SpdOperator,
    b: &RhsBlock,
    opts: &BlockCgOptions,
) -> Result<(RhsBlock, BlockCgReport)> {
    let n = a.dim();
    if b.rows() != n {
        return Err(Error::DimensionMismatch {
            detail: format!("operator dim {} vs rhs rows {}", n, b.rows()),
        });
    }
    if opts.jacobi_scaling {
        let diag = a.diagonal();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidArgument(
                "Jacobi scaling needs a strictly positive diagonal".into(),
            ));
        }
        let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut b_scaled = b.clone();
        for j in 0..b_scaled.cols() {
            for (v, s) in b_scaled.col_mut(j).iter_mut().zip(&scale) {
                *v *= s;
            }
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            let xs: Vec<f64> = x.iter().zip(&scale).map(|(v, s)| v * s).collect();
            a.matvec_into(&xs, y);
            for (v, s) in y.iter_mut().zip(&scale) {
                *v *= s;
            }
        };
        let (mut x, iterations, width) = block_cg_core(n, apply, &b_scaled, opts)?;
        for j in 0..x.cols() {
            for (v, s) in x.col_mut(j).iter_mut().zip(&scale) {
                *v *= s;
            }
        }
        let worst = worst_relative_residual(a, &x, b);
        Ok((x, BlockCgReport { iterations, initial_block_width: width, worst_relative_residual: worst }))
    } else {
        let apply = |x: &[f64], y: &mut [f64]| a.matvec_into(x, y);
        let (x, iterations, width) = block_cg_core(n, apply, b, opts)?;
        let worst = worst_relative_residual(a, &x, b);
        Ok((x, BlockCgReport { iterations, initial_block_width: width, worst_relative_residual: worst }))
    }
}

fn worst_relative_residual(a: &SpdOperator, x: &RhsBlock, b: &RhsBlock) -> f64 {
    let mut worst: f64 = 0.0;
    let mut ax = vec![0.0; a.dim()];
    for j in 0..b.cols() {
        let bj = b.col(j);
        let bnorm = norm(bj);
        if bnorm == 0.0 {
            continue;
        }
        a.matvec_into(x.col(j), &mut ax);
        let res = bj
            .iter()
            .zip(&ax)
            .map(|(bi, ai)| (bi - ai) * (bi - ai))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(res / bnorm);
    }
    worst
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt against an existing orthonormal set, two projection
/// passes for robustness.  Returns the accumulated coefficients and the
/// remainder norm; appends the normalized remainder to `basis` unless it is
/// dropped as linearly dependent.
fn mgs_insert(basis: &mut Vec<Vec<f64>>, coeffs_out: &mut Vec<f64>, mut t: Vec<f64>) -> Option<f64> {
    let pre_norm = norm(&t);
    coeffs_out.clear();
    coeffs_out.resize(basis.len(), 0.0);
    if pre_norm == 0.0 {
        return None;
    }
    for _pass in 0..2 {
        for (i, q) in basis.iter().enumerate() {
            let c = dot(q, &t);
            coeffs_out[i] += c;
            for (tv, qv) in t.iter_mut().zip(q) {
                *tv -= c * qv;
            }
        }
    }
    let post_norm = norm(&t);
    if post_norm <= MGS_DROP_TOL * pre_norm {
        return None;
    }
    let inv = 1.0 / post_norm;
    for tv in &mut t {
        *tv *= inv;
    }
    basis.push(t);
    Some(post_norm)
}

/// Core BCGrQ iteration over a generic SPD application.
fn block_cg_core(
    n: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    b: &RhsBlock,
    opts: &BlockCgOptions,
) -> Result<(RhsBlock, usize, usize)> {
    let m = b.cols();
    let tol = opts.tol;
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let mut x = RhsBlock::zeros(n, m);

    let bnorm: Vec<f64> = (0..m).map(|j| norm(b.col(j))).collect();

    // Initial residual factorization R = Q C over the nontrivial columns.
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut c_cols: Vec<Vec<f64>> = Vec::new();
    let mut coeffs = Vec::new();
    for j in 0..m {
        if bnorm[j] == 0.0 {
            continue; // zero rhs: x_j = 0 is exact
        }
        let kept = mgs_insert(&mut q, &mut coeffs, b.col(j).to_vec());
        let mut c = coeffs.clone();
        if let Some(diag) = kept {
            c.push(diag);
        }
        c_cols.push(c);
        active.push(j);
    }
    // Align all coefficient columns with the final basis size; basis vectors
    // spawned by later columns carry zero coefficients for earlier ones.
    let s0 = q.len();
    for c in &mut c_cols {
        c.resize(s0, 0.0);
    }
    // Columns already below tolerance stay out of the iteration.
    retain_unconverged(&mut active, &mut c_cols, &bnorm, tol);

    let mut p: Vec<Vec<f64>> = q.clone();
    let initial_width = q.len();
    let mut iterations = 0;

    while !active.is_empty() {
        if q.is_empty() {
            break; // residual space exhausted: remaining residuals are numerically zero
        }
        if iterations >= max_iter {
            let worst = active
                .iter()
                .zip(&c_cols)
                .map(|(&j, c)| norm(c) / bnorm[j])
                .fold(0.0, f64::max);
            return Err(Error::SolverMaxIter { max_iter, worst_residual: worst });
        }
        iterations += 1;
        let s = q.len();

        // AP and the small Gram matrix S = P^T A P.
        let mut ap: Vec<Vec<f64>> = Vec::with_capacity(s);
        for pk in &p {
            let mut out = vec![0.0; n];
            apply(pk, &mut out);
            ap.push(out);
        }
        let mut gram = vec![0.0; s * s];
        for i in 0..s {
            for j in i..s {
                let v = dot(&p[i], &ap[j]);
                gram[i * s + j] = v;
                gram[j * s + i] = v;
            }
        }
        let gram_chol = DenseCholesky::factor_rows(s, gram).map_err(|_| Error::SolverMaxIter {
            max_iter,
            worst_residual: f64::NAN,
        })?;

        // Solution update: x_j += P (S^{-1} c_j) for the active columns.
        for (c, &j) in c_cols.iter().zip(&active) {
            let t = gram_chol.solve_vec(c);
            let xj = x.col_mut(j);
            for (pi, ti) in p.iter().zip(&t) {
                if *ti != 0.0 {
                    for (xv, pv) in xj.iter_mut().zip(pi) {
                        *xv += ti * pv;
                    }
                }
            }
        }

        // T = Q - A P S^{-1}; new orthonormal factor T = Q' Z.
        let gamma_cols: Vec<Vec<f64>> = (0..s)
            .map(|k| {
                let mut e = vec![0.0; s];
                e[k] = 1.0;
                gram_chol.solve_vec(&e)
            })
            .collect();
        let mut q_new: Vec<Vec<f64>> = Vec::new();
        let mut z_rows_by_col: Vec<(Vec<f64>, Option<f64>)> = Vec::with_capacity(s);
        for k in 0..s {
            let mut t = q[k].clone();
            for (i, api) in ap.iter().enumerate() {
                let g = gamma_cols[k][i];
                if g != 0.0 {
                    for (tv, av) in t.iter_mut().zip(api) {
                        *tv -= g * av;
                    }
                }
            }
            let kept = mgs_insert(&mut q_new, &mut coeffs, t);
            z_rows_by_col.push((coeffs.clone(), kept));
        }
        let s_new = q_new.len();
        // Assemble Z (s_new x s): column k collects its projection coefficients
        // plus its own diagonal remainder when the column spawned a basis vector.
        let mut z = vec![0.0; s_new * s];
        {
            let mut next_row = 0;
            for (k, (cfs, kept)) in z_rows_by_col.iter().enumerate() {
                for (i, v) in cfs.iter().enumerate() {
                    z[i * s + k] = *v;
                }
                if let Some(diag) = kept {
                    z[next_row * s + k] = *diag;
                    next_row += 1;
                }
            }
        }

        // C' = Z C, column by column.
        for c in c_cols.iter_mut() {
            let mut cn = vec![0.0; s_new];
            for (i, cv) in cn.iter_mut().enumerate() {
                let row = &z[i * s..(i + 1) * s];
                *cv = dot(row, c);
            }
            *c = cn;
        }

        // P' = Q' + P Z^T.
        let mut p_new: Vec<Vec<f64>> = Vec::with_capacity(s_new);
        for (i, qv) in q_new.iter().enumerate() {
            let mut col = qv.clone();
            let row = &z[i * s..(i + 1) * s];
            for (k, pk) in p.iter().enumerate() {
                let w = row[k];
                if w != 0.0 {
                    for (cv, pv) in col.iter_mut().zip(pk) {
                        *cv += w * pv;
                    }
                }
            }
            p_new.push(col);
        }

        q = q_new;
        p = p_new;
        retain_unconverged(&mut active, &mut c_cols, &bnorm, tol);
    }

    Ok((x, iterations, initial_width))
}

/// Drops converged columns from the active set (their solutions are final).
fn retain_unconverged(active: &mut Vec<usize>, c_cols: &mut Vec<Vec<f64>>, bnorm: &[f64], tol: f64) {
    let mut keep_active = Vec::with_capacity(active.len());
    let mut keep_c = Vec::with_capacity(c_cols.len());
    for (c, &j) in c_cols.iter().zip(active.iter()) {
        if norm(c) > tol * bnorm[j] {
            keep_active.push(j);
            keep_c.push(c.clone());
        }
    }
    *active = keep_active;
    *c_cols = keep_c;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn uniform(rng: &mut ChaCha8Rng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Dense random SPD matrix `M^T M + n I` as a CSR operator.
    fn random_spd(n: usize, seed: u64) -> (SpdOperator, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = vec![0.0; n * n];
        for v in &mut m {
            *v = 2.0 * uniform(&mut rng) - 1.0;
        }
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += m[k * n + i] * m[k * n + j];
                }
                dense[i * n + j] = acc + if i == j { n as f64 } else { 0.0 };
            }
        }
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            for j in 0..n {
                b.add(i, j, dense[i * n + j]);
            }
        }
        (b.build_spd(), dense)
    }

    fn random_block(n: usize, m: usize, seed: u64) -> RhsBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect())
            .collect();
        RhsBlock::from_columns(&cols)
    }

    #[test]
    fn matches_dense_cholesky_on_random_spd() {
        let (a, dense) = random_spd(50, 7);
        let b = random_block(50, 8, 11);
        let (x, report) = solve_block_cg(&a, &b, &BlockCgOptions::default()).unwrap();
        let chol = DenseCholesky::factor_rows(50, dense).unwrap();
        let x_ref = chol.solve_block(&b);
        assert!(
            x.max_abs_diff(&x_ref) <= 1e-8,
            "max diff {:.3e}, residual {:.3e}",
            x.max_abs_diff(&x_ref),
            report.worst_relative_residual
        );
        assert!(report.worst_relative_residual <= 1e-9);
    }

    #[test]
    fn duplicate_columns_get_identical_solutions() {
        let (a, _) = random_spd(30, 3);
        let col: Vec<f64> = (0..30).map(|i| (i as f64 * 0.21).sin()).collect();
        let b = RhsBlock::from_columns(&[col.clone(), col.clone(), col]);
        let (x, _) = solve_block_cg(&a, &b, &BlockCgOptions::default()).unwrap();
        for i in 0..30 {
            assert!((x.get(i, 0) - x.get(i, 1)).abs() <= 1e-12);
            assert!((x.get(i, 0) - x.get(i, 2)).abs() <= 1e-12);
        }
    }

    #[test]
    fn column_by_column_agrees_with_block_solve() {
        let (a, _) = random_spd(40, 5);
        let b = random_block(40, 6, 9);
        let opts = BlockCgOptions { tol: 1e-12, ..Default::default() };
        let (x_block, _) = solve_block_cg(&a, &b, &opts).unwrap();
        for j in 0..b.cols() {
            let single = RhsBlock::from_columns(&[b.col(j).to_vec()]);
            let (xj, _) = solve_block_cg(&a, &single, &opts).unwrap();
            for i in 0..40 {
                assert!(
                    (x_block.get(i, j) - xj.get(i, 0)).abs() <= 1e-9,
                    "col {j} row {i}: {} vs {}",
                    x_block.get(i, j),
                    xj.get(i, 0)
                );
            }
        }
    }

    #[test]
    fn zero_rhs_columns_yield_zero_solutions() {
        let (a, _) = random_spd(20, 13);
        let mut cols = vec![vec![0.0; 20]];
        cols.push((0..20).map(|i| i as f64).collect());
        let b = RhsBlock::from_columns(&cols);
        let (x, _) = solve_block_cg(&a, &b, &BlockCgOptions::default()).unwrap();
        assert!(x.col(0).iter().all(|&v| v == 0.0));
        assert!(x.col(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn tight_tolerance_reaches_near_machine_precision() {
        let (a, _) = random_spd(12, 21);
        let b = random_block(12, 2, 22);
        let opts = BlockCgOptions { tol: 1e-14, ..Default::default() };
        let (_, report) = solve_block_cg(&a, &b, &opts).unwrap();
        assert!(report.worst_relative_residual <= 1e-13);
    }

    #[test]
    fn iteration_cap_produces_solver_error() {
        let (a, _) = random_spd(40, 31);
        let b = random_block(40, 2, 32);
        let opts = BlockCgOptions { tol: 1e-12, max_iter: Some(1), ..Default::default() };
        match solve_block_cg(&a, &b, &opts) {
            Err(Error::SolverMaxIter { max_iter, worst_residual }) => {
                assert_eq!(max_iter, 1);
                assert!(worst_residual > 1e-12);
            }
            other => panic!("expected iteration cap error, got {other:?}"),
        }
    }

    #[test]
    fn jacobi_scaling_solves_badly_scaled_systems() {
        // Diagonal entries spanning ten orders of magnitude.
        let n = 25;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, 10f64.powi((i % 11) as i32 - 5));
            if i + 1 < n {
                let v = 1e-7;
                b.add(i, i + 1, v);
                b.add(i + 1, i, v);
            }
        }
        let a = b.build_spd();
        let rhs = random_block(n, 3, 41);
        let opts = BlockCgOptions { jacobi_scaling: true, ..Default::default() };
        let (_, report) = solve_block_cg(&a, &rhs, &opts).unwrap();
        assert!(report.worst_relative_residual <= 1e-9);
    }

    #[test]
    fn block_width_never_needs_more_iterations_than_worst_column() {
        let (a, _) = random_spd(60, 17);
        let b = random_block(60, 5, 18);
        let opts = BlockCgOptions { tol: 1e-10, ..Default::default() };
        let (_, block_report) = solve_block_cg(&a, &b, &opts).unwrap();
        let mut worst_single = 0;
        for j in 0..b.cols() {
            let single = RhsBlock::from_columns(&[b.col(j).to_vec()]);
            let (_, r) = solve_block_cg(&a, &single, &opts).unwrap();
            worst_single = worst_single.max(r.iterations);
        }
        // Soft property of block Krylov spaces; allow a little floating-point slack.
        assert!(
            block_report.iterations <= worst_single + 2,
            "block took {} iterations vs worst single {}",
            block_report.iterations,
            worst_single
        );
    }
}
