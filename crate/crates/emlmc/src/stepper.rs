//! Shared-matrix ensemble time stepping.
//!
//! All members of a group advance through the same BDF2 system matrix
//! `(3/(2Δt)) M + A(ā)` built from the group-mean coefficient `ā`; each
//! member's deviation `a_j - ā` acts explicitly on the extrapolated state
//! `2uⁿ - uⁿ⁻¹` and lands on the right-hand side. One block solve with J
//! right-hand sides replaces J independent solves per step.
//!
//! The first step bootstraps with one backward Euler step through
//! `(1/Δt) M + A(ā)` (or by interpolating a known exact solution). The run
//! also accumulates both sides of the discrete energy bound that certifies
//! the explicit deviation treatment, weighted by the group's stability
//! numbers.

use std::time::Instant;

use rayon::prelude::*;

use crate::assemble::{assemble_mass, assemble_stiffness, LoadAssembler};
use crate::coefficient::CoefficientSample;
use crate::dirichlet::{boundary_values, DirichletSystem};
use crate::group::StabilityEstimate;
use crate::linalg::{PreparedSolver, RhsBlock, SolverChoice, SpdOperator};
use crate::problem::SampleData;
use crate::quadrature::QuadratureRule;
use crate::space::{FeSpace, NodalField};
use crate::{Error, Result};

/// How the second initial state is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bootstrap {
    /// One backward Euler step with the shared mean matrix.
    BackwardEuler,
    /// Nodal interpolation of the exact solution at the first time level.
    Analytic,
}

/// Time discretization and solver selection for one run.
#[derive(Clone, Debug)]
pub struct StepperConfig {
    /// Time step (must divide the final time).
    pub dt: f64,
    /// Final time.
    pub final_time: f64,
    /// First-step strategy.
    pub bootstrap: Bootstrap,
    /// Linear solver for the shared systems.
    pub solver: SolverChoice,
}

/// Both sides of the discrete energy bound for one group run.
#[derive(Clone, Copy, Debug)]
pub struct EnergyAudit {
    /// Dissipation side (final energies plus accumulated gradients).
    pub lhs: f64,
    /// Data side (initial energies plus forcing).
    pub rhs: f64,
    /// Group coercivity floor used in the weights.
    pub theta_hat: f64,
    /// Group deviation bound used in the weights.
    pub theta_plus: f64,
}

/// Work counters split into the matrix/rhs phase and the solve phase.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveStats {
    /// Solver preparations (factorizations for the direct solver).
    pub preparations: usize,
    /// Block solves performed.
    pub block_solves: usize,
    /// Accumulated iteration count (zero for the direct solver).
    pub iterations: usize,
    /// Worst relative residual reported by any solve.
    pub worst_residual: f64,
    /// Seconds spent assembling matrices, loads, and boundary data.
    pub assembly_seconds: f64,
    /// Seconds spent preparing and solving the shared systems.
    pub solve_seconds: f64,
}

impl SolveStats {
    /// Merges counters from another run.
    pub fn absorb(&mut self, other: &SolveStats) {
        self.preparations += other.preparations;
        self.block_solves += other.block_solves;
        self.iterations += other.iterations;
        self.worst_residual = self.worst_residual.max(other.worst_residual);
        self.assembly_seconds += other.assembly_seconds;
        self.solve_seconds += other.solve_seconds;
    }
}

/// Result of advancing one group to the final time.
#[derive(Debug)]
pub struct GroupRun {
    /// Requested states, one block (dofs × members) per requested step, in
    /// request order.
    pub snapshots: Vec<RhsBlock>,
    /// Energy bound at the final step.
    pub audit: EnergyAudit,
    /// Energy bound partial sums after every completed step (states 1..N).
    pub audit_trace: Vec<EnergyAudit>,
    /// Work counters.
    pub stats: SolveStats,
}

/// Per-space operators shared by every group on that space.
pub struct SpaceOperators {
    /// The finite element space.
    pub space: FeSpace,
    /// Mass matrix.
    pub mass: SpdOperator,
    /// Unit-coefficient stiffness (gradient norms).
    pub a_unit: SpdOperator,
    /// Cached load-assembly geometry.
    pub load: LoadAssembler,
    /// Assembly quadrature rule.
    pub rule: QuadratureRule,
}

impl SpaceOperators {
    /// Assembles the space-wide operators once.
    pub fn new(space: FeSpace) -> Self {
        let rule = QuadratureRule::degree5();
        let mass = assemble_mass(&space, &rule);
        let a_unit = assemble_stiffness(&space, |_, _| 1.0, &rule);
        let load = LoadAssembler::new(&space, &rule);
        SpaceOperators { space, mass, a_unit, load, rule }
    }

    /// Assembly quadrature points (stability probe candidates).
    pub fn quadrature_points(&self) -> &[[f64; 2]] {
        self.load.quadrature_points()
    }
}

/// Number of steps for a grid-aligned `(dt, final_time)` pair.
pub fn time_steps(dt: f64, final_time: f64) -> Result<usize> {
    if !(dt > 0.0) || !(final_time > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} and final time {final_time} must be positive"
        )));
    }
    let n = (final_time / dt).round();
    if n < 1.0 || (n * dt - final_time).abs() > 1e-9 * final_time.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} does not divide the final time {final_time}"
        )));
    }
    Ok(n as usize)
}

/// Mean over columns of the quadratic form of `col - shift` per column.
fn avg_qform(op: &SpdOperator, block: &RhsBlock, shift: &RhsBlock) -> f64 {
    let mut tmp = vec![0.0; block.rows()];
    let mut sum = 0.0;
    for j in 0..block.cols() {
        for (t, (x, s)) in tmp.iter_mut().zip(block.col(j).iter().zip(shift.col(j))) {
            *t = x - s;
        }
        sum += op.quadratic_form(&tmp);
    }
    sum / block.cols() as f64
}

/// Mean over columns of the quadratic form of `2a - b - shift` per column.
fn avg_qform_combo(op: &SpdOperator, a: &RhsBlock, b: &RhsBlock, shift: &RhsBlock) -> f64 {
    let mut tmp = vec![0.0; a.rows()];
    let mut sum = 0.0;
    for j in 0..a.cols() {
        let cols = a.col(j).iter().zip(b.col(j)).zip(shift.col(j));
        for (t, ((x, y), s)) in tmp.iter_mut().zip(cols) {
            *t = 2.0 * x - y - s;
        }
        sum += op.quadratic_form(&tmp);
    }
    sum / a.cols() as f64
}

/// L² norm of `a ∇g_h` for a nodal field: the boundary lift's contribution
/// to the energy bound's forcing surrogate.
fn coeff_grad_norm(
    space: &FeSpace,
    rule: &QuadratureRule,
    coeff: &CoefficientSample,
    values: &[f64],
) -> f64 {
    let field = NodalField { values: values.to_vec() };
    let mut total = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let coords = space.mesh.triangle_coords(t);
        let area = space.mesh.triangle_area(t);
        for (q, &bary) in rule.points.iter().enumerate() {
            let x = bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0];
            let y = bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1];
            let g = field.grad_local(space, t, bary);
            let a = coeff.eval(x, y);
            total += rule.weights[q] * area * a * a * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    total.max(0.0).sqrt()
}

/// Advances one group of members to the final time.
///
/// `snapshot_steps` lists the time-step indices (0 = initial state) whose
/// full nodal states are returned, in request order.
pub fn run_group(
    ops: &SpaceOperators,
    members: &[SampleData],
    mean: &CoefficientSample,
    estimate: &StabilityEstimate,
    cfg: &StepperConfig,
    snapshot_steps: &[usize],
) -> Result<GroupRun> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("group with no members".into()));
    }
    if !estimate.is_stable() {
        return Err(Error::GroupNotCoercive { theta_hat: estimate.theta_hat });
    }
    let n_steps = time_steps(cfg.dt, cfg.final_time)?;
    if let Some(&bad) = snapshot_steps.iter().find(|&&s| s > n_steps) {
        return Err(Error::InvalidArgument(format!(
            "snapshot step {bad} beyond the last step {n_steps}"
        )));
    }
    if cfg.bootstrap == Bootstrap::Analytic && members.iter().any(|m| m.exact.is_none()) {
        return Err(Error::MissingExactSolution {
            what: "analytic bootstrap of a sample without a closed-form solution".into(),
        });
    }

    let space = &ops.space;
    let nd = space.n_dofs();
    let j_count = members.len();
    let dt = cfg.dt;
    let mut stats = SolveStats::default();

    // Group matrices: the mean-coefficient stiffness, each member's
    // deviation form, and the reduced shared systems.
    let t_asm = Instant::now();
    let a_mean = assemble_stiffness(space, |x, y| mean.eval(x, y), &ops.rule);
    let a_dev: Vec<SpdOperator> = members
        .iter()
        .map(|m| {
            let c = m.coefficient.clone();
            let mref = mean;
            assemble_stiffness(space, move |x, y| c.eval(x, y) - mref.eval(x, y), &ops.rule)
        })
        .collect();
    let bdf2_full = ops.mass.linear_combination(1.5 / dt, &a_mean, 1.0)?;
    let bdf2 = DirichletSystem::new(space, &bdf2_full);
    let be = if cfg.bootstrap == Bootstrap::BackwardEuler {
        let be_full = ops.mass.linear_combination(1.0 / dt, &a_mean, 1.0)?;
        Some(DirichletSystem::new(space, &be_full))
    } else {
        None
    };
    stats.assembly_seconds += t_asm.elapsed().as_secs_f64();

    let mut snapshots: Vec<Option<RhsBlock>> = vec![None; snapshot_steps.len()];
    let capture = |slots: &mut Vec<Option<RhsBlock>>, step: usize, state: &RhsBlock| {
        for (k, &s) in snapshot_steps.iter().enumerate() {
            if s == step {
                slots[k] = Some(state.clone());
            }
        }
    };

    // Initial state: nodal interpolant of each member's initial data.
    let mut u_prev = RhsBlock::zeros(nd, j_count);
    for (j, m) in members.iter().enumerate() {
        let init = &m.initial;
        let field = NodalField::interpolate(space, |x, y| init(x, y));
        u_prev.col_mut(j).copy_from_slice(&field.values);
    }
    capture(&mut snapshots, 0, &u_prev);

    // Bootstrap to the first time level.
    let t1 = dt;
    let mut u_curr = RhsBlock::zeros(nd, j_count);
    match cfg.bootstrap {
        Bootstrap::Analytic => {
            let t_b = Instant::now();
            for (j, m) in members.iter().enumerate() {
                let exact = m.exact.as_ref().unwrap();
                let field = NodalField::interpolate(space, |x, y| exact(x, y, t1));
                u_curr.col_mut(j).copy_from_slice(&field.values);
            }
            stats.assembly_seconds += t_b.elapsed().as_secs_f64();
        }
        Bootstrap::BackwardEuler => {
            let be = be.as_ref().unwrap();
            let t_asm = Instant::now();
            let mut b_full = RhsBlock::zeros(nd, j_count);
            let inv_dt = 1.0 / dt;
            b_full
                .raw_mut()
                .par_chunks_mut(nd)
                .enumerate()
                .for_each(|(j, col)| {
                    let m = &members[j];
                    let forcing = &m.forcing;
                    ops.load.assemble_into(|x, y| forcing(x, y, t1), col);
                    let u0 = u_prev.col(j);
                    let mut w = vec![0.0; nd];
                    let mut tmp = vec![0.0; nd];
                    for (wi, ui) in w.iter_mut().zip(u0) {
                        *wi = ui * inv_dt;
                    }
                    ops.mass.matvec_into(&w, &mut tmp);
                    for (c, t) in col.iter_mut().zip(&tmp) {
                        *c += t;
                    }
                    a_dev[j].matvec_into(u0, &mut tmp);
                    for (c, t) in col.iter_mut().zip(&tmp) {
                        *c -= t;
                    }
                });
            let mut b_i = RhsBlock::zeros(bdf2.n_interior(), j_count);
            let mut gvals = Vec::with_capacity(j_count);
            for j in 0..j_count {
                let bdata = &members[j].boundary;
                let g = boundary_values(space, |x, y| bdata(x, y, t1));
                b_i.col_mut(j).copy_from_slice(&be.reduce_rhs(b_full.col(j), &g));
                gvals.push(g);
            }
            stats.assembly_seconds += t_asm.elapsed().as_secs_f64();

            let t_solve = Instant::now();
            let solver = PreparedSolver::prepare(&be.matrix, &cfg.solver)?;
            stats.preparations += 1;
            let (x, info) = solver.solve_block(&b_i)?;
            stats.block_solves += 1;
            stats.iterations += info.iterations;
            stats.worst_residual = stats.worst_residual.max(info.worst_relative_residual);
            stats.solve_seconds += t_solve.elapsed().as_secs_f64();

            for j in 0..j_count {
                let col = &mut u_curr.raw_mut()[j * nd..(j + 1) * nd];
                bdf2.expand_into(x.col(j), &gvals[j], col);
            }
        }
    }
    capture(&mut snapshots, 1, &u_curr);

    // The energy bound is certified for the lifted trajectory `u - ĝ`, whose
    // boundary values vanish; the lift's diffusion flux `a_j ∇ĝ_j` joins the
    // forcing surrogate. Boundary data is read once at the first imposed time
    // (every shipped problem has time-constant boundary data).
    let t_lift = Instant::now();
    let mut g_lift = RhsBlock::zeros(nd, j_count);
    let mut lift_fnorm = vec![0.0; j_count];
    for (j, m) in members.iter().enumerate() {
        let bdata = &m.boundary;
        let g = boundary_values(space, |x, y| bdata(x, y, t1));
        if g.iter().any(|&v| v != 0.0) {
            let col = g_lift.col_mut(j);
            for (&d, &v) in space.boundary_dofs.iter().zip(&g) {
                col[d] = v;
            }
            lift_fnorm[j] = coeff_grad_norm(space, &ops.rule, &m.coefficient, g_lift.col(j));
        }
    }
    stats.assembly_seconds += t_lift.elapsed().as_secs_f64();

    // Energy bookkeeping of the starting data.
    let th = estimate.theta_hat;
    let tp = estimate.theta_plus;
    let audit_u0_grad = avg_qform(&ops.a_unit, &u_prev, &g_lift);
    let audit_u1_mass = avg_qform(&ops.mass, &u_curr, &g_lift);
    let audit_u1_combo = avg_qform_combo(&ops.mass, &u_curr, &u_prev, &g_lift);
    let audit_u1_grad = avg_qform(&ops.a_unit, &u_curr, &g_lift);
    let rhs_initial = 0.25 * audit_u1_mass
        + 0.25 * audit_u1_combo
        + 0.5 * th * dt * audit_u1_grad
        + th / 6.0 * dt * audit_u0_grad;
    let mut grad_sum = 0.0;
    let mut f_sum = 0.0;
    let mut audit_trace = Vec::with_capacity(n_steps);
    audit_trace.push(EnergyAudit {
        lhs: 0.25 * audit_u1_mass + 0.25 * audit_u1_combo + 0.5 * th * dt * audit_u1_grad,
        rhs: rhs_initial,
        theta_hat: th,
        theta_plus: tp,
    });

    // Shared-matrix BDF2 steps.
    let t_prep = Instant::now();
    let solver = PreparedSolver::prepare(&bdf2.matrix, &cfg.solver)?;
    stats.preparations += 1;
    stats.solve_seconds += t_prep.elapsed().as_secs_f64();

    let inv_2dt = 0.5 / dt;
    let mut u_next = RhsBlock::zeros(nd, j_count);
    let mut b_full = RhsBlock::zeros(nd, j_count);
    let mut b_i = RhsBlock::zeros(bdf2.n_interior(), j_count);
    let mut fnorm2 = vec![0.0; j_count];
    for n in 1..n_steps {
        grad_sum += avg_qform(&ops.a_unit, &u_curr, &g_lift);
        let t_next = (n + 1) as f64 * dt;

        let t_asm = Instant::now();
        {
            let u_curr = &u_curr;
            let u_prev = &u_prev;
            b_full
                .raw_mut()
                .par_chunks_mut(nd)
                .zip(fnorm2.par_iter_mut())
                .enumerate()
                .for_each(|(j, (col, fn2))| {
                    let m = &members[j];
                    let forcing = &m.forcing;
                    ops.load.assemble_into(|x, y| forcing(x, y, t_next), col);
                    let uc = u_curr.col(j);
                    let up = u_prev.col(j);
                    let mut w = vec![0.0; nd];
                    let mut tmp = vec![0.0; nd];
                    for i in 0..nd {
                        w[i] = (4.0 * uc[i] - up[i]) * inv_2dt;
                    }
                    ops.mass.matvec_into(&w, &mut tmp);
                    for (c, t) in col.iter_mut().zip(&tmp) {
                        *c += t;
                    }
                    for i in 0..nd {
                        w[i] = 2.0 * uc[i] - up[i];
                    }
                    a_dev[j].matvec_into(&w, &mut tmp);
                    for (c, t) in col.iter_mut().zip(&tmp) {
                        *c -= t;
                    }
                    let f_l2 = ops.load.integrate_squared(|x, y| forcing(x, y, t_next)).sqrt();
                    let surrogate = f_l2 + lift_fnorm[j];
                    *fn2 = surrogate * surrogate;
                });
        }
        let mut gvals = Vec::with_capacity(j_count);
        for j in 0..j_count {
            let bdata = &members[j].boundary;
            let g = boundary_values(space, |x, y| bdata(x, y, t_next));
            b_i.col_mut(j).copy_from_slice(&bdf2.reduce_rhs(b_full.col(j), &g));
            gvals.push(g);
        }
        stats.assembly_seconds += t_asm.elapsed().as_secs_f64();

        let t_solve = Instant::now();
        let (x, info) = solver.solve_block(&b_i)?;
        stats.block_solves += 1;
        stats.iterations += info.iterations;
        stats.worst_residual = stats.worst_residual.max(info.worst_relative_residual);
        stats.solve_seconds += t_solve.elapsed().as_secs_f64();

        for j in 0..j_count {
            let col = &mut u_next.raw_mut()[j * nd..(j + 1) * nd];
            bdf2.expand_into(x.col(j), &gvals[j], col);
        }
        f_sum += fnorm2.iter().sum::<f64>() / j_count as f64;

        std::mem::swap(&mut u_prev, &mut u_curr);
        std::mem::swap(&mut u_curr, &mut u_next);
        capture(&mut snapshots, n + 1, &u_curr);

        // Energy bound after this step: dissipation side vs data side.
        audit_trace.push(EnergyAudit {
            lhs: 0.25 * avg_qform(&ops.mass, &u_curr, &g_lift)
                + 0.25 * avg_qform_combo(&ops.mass, &u_curr, &u_prev, &g_lift)
                + 0.5 * th * dt * avg_qform(&ops.a_unit, &u_curr, &g_lift)
                + (th / 3.0 - tp) * dt * grad_sum,
            rhs: dt / (2.0 * (th - 3.0 * tp)) * f_sum + rhs_initial,
            theta_hat: th,
            theta_plus: tp,
        });
    }
    let audit = *audit_trace.last().expect("at least one step");

    let snapshots = snapshots
        .into_iter()
        .map(|s| s.expect("validated snapshot step"))
        .collect();
    Ok(GroupRun { snapshots, audit, stats, audit_trace })
}
