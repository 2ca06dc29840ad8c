//! Level schedules, coupled level corrections, and the telescoping
//! multilevel estimator.
//!
//! Level `l` pairs the mesh of size `h_l = 2^{-l} h_0` with the time step
//! `dt_l = 2^{-l} dt_0`.  A level correction averages `u_l - u_{l-1}` over a
//! batch of samples, where both solves consume the same draws and the same
//! ensemble grouping; the estimator telescopes the corrections up to the
//! finest level.  All sample draws are keyed by `(level, replica, index)`
//! tuples so results do not depend on execution order.

use std::time::Instant;

use crate::coefficient::CoefficientSample;
use crate::group::{estimate_stability, partition_stable, probe_lattice, EnsembleGroup, StabilityProbes};
use crate::interpolate::InterpolationOperator;
use crate::linalg::SolverChoice;
use crate::mesh::build_hierarchy;
use crate::problem::{Problem, SampleData};
use crate::sampling::SampleStream;
use crate::space::{FeSpace, NodalField};
use crate::stepper::{
    run_group, time_steps, Bootstrap, EnergyAudit, SolveStats, SpaceOperators, StepperConfig,
};
use crate::{Error, Result};

/// How per-level sample counts are generated.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleKind {
    /// `J_l = 2^{4(L-l)+1}`: sixteenfold growth toward the coarse levels.
    Tabulated,
    /// `J_l = ceil((l+1)^{1+eps} * 2^{2m(L-l)} * J_L)` for degree `m`.
    Balanced { epsilon: f64 },
    /// User-provided per-level counts.
    Explicit { counts: Vec<usize> },
}

/// One level's discretization pair and sample count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelEntry {
    /// Mesh size `sqrt(2)/n_side`.
    pub h: f64,
    /// Time step.
    pub dt: f64,
    /// Number of samples drawn at this level.
    pub samples: usize,
}

/// The full per-level discretization/sampling plan.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSchedule {
    /// How the sample counts were generated.
    pub kind: ScheduleKind,
    /// Entries for levels `0..=L`.
    pub entries: Vec<LevelEntry>,
}

impl LevelSchedule {
    /// Finest level index `L`.
    pub fn max_level(&self) -> usize {
        self.entries.len() - 1
    }
}

/// Builds a schedule: geometric halving of `h` and `dt` from `(h0, dt0)`,
/// sample counts per `kind`.  `j_final` is the finest-level count used by
/// the balanced kind (ignored by the others); `degree` is the FE degree `m`.
pub fn make_schedule(
    kind: &ScheduleKind,
    h0: f64,
    dt0: f64,
    max_level: usize,
    j_final: usize,
    degree: usize,
) -> Result<LevelSchedule> {
    if !(h0 > 0.0 && dt0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "schedule needs positive h0 and dt0, got h0 = {h0}, dt0 = {dt0}"
        )));
    }
    let counts: Vec<usize> = match kind {
        ScheduleKind::Tabulated => (0..=max_level)
            .map(|l| 1usize << (4 * (max_level - l) + 1))
            .collect(),
        ScheduleKind::Balanced { epsilon } => {
            if !(*epsilon >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "balanced schedule needs epsilon >= 0, got {epsilon}"
                )));
            }
            if j_final == 0 {
                return Err(Error::InvalidArgument(
                    "balanced schedule needs a positive finest-level sample count".into(),
                ));
            }
            (0..=max_level)
                .map(|l| {
                    let growth = ((l + 1) as f64).powf(1.0 + epsilon);
                    let refine = 2f64.powi((2 * degree * (max_level - l)) as i32);
                    (growth * refine * j_final as f64).ceil() as usize
                })
                .collect()
        }
        ScheduleKind::Explicit { counts } => {
            if counts.len() != max_level + 1 {
                return Err(Error::InvalidArgument(format!(
                    "explicit schedule lists {} counts for {} levels",
                    counts.len(),
                    max_level + 1
                )));
            }
            counts.clone()
        }
    };
    for (l, pair) in counts.windows(2).enumerate() {
        if pair[1] > pair[0] {
            return Err(Error::InvalidArgument(format!(
                "sample counts must be nonincreasing: J_{l} = {} < J_{} = {}",
                pair[0],
                l + 1,
                pair[1]
            )));
        }
    }
    if counts.iter().any(|&j| j == 0) {
        return Err(Error::InvalidArgument("every level needs at least one sample".into()));
    }
    let entries = (0..=max_level)
        .map(|l| {
            let scale = 2f64.powi(-(l as i32));
            LevelEntry { h: h0 * scale, dt: dt0 * scale, samples: counts[l] }
        })
        .collect();
    Ok(LevelSchedule { kind: kind.clone(), entries })
}

/// Shared-system options for every solve inside one run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// First-step strategy.
    pub bootstrap: Bootstrap,
    /// Linear solver for the shared systems.
    pub solver: SolverChoice,
    /// Force one group per sample (per-sample matrices, no shared system).
    pub singleton_groups: bool,
}

/// Energy-bound ledger for one group solve inside a correction.
#[derive(Clone, Debug)]
pub struct GroupAudit {
    /// Discretization level the solve ran on.
    pub level: usize,
    /// True for the coarse companion solve of a correction.
    pub companion: bool,
    /// Group index within the partition.
    pub group: usize,
    /// Members in the group.
    pub members: usize,
    /// Per-step partial sums of the energy bound.
    pub trace: Vec<EnergyAudit>,
}

/// Sample average of `u_l - u_{l-1}` (level 0: of `u_0`) with bookkeeping.
#[derive(Debug)]
pub struct LevelCorrection {
    /// Level `l`.
    pub level: usize,
    /// Samples consumed.
    pub samples: usize,
    /// Groups after stability splitting.
    pub groups: usize,
    /// Mean fields on the level-`l` space, one per shared time point
    /// `t_k = k dt_0`, `k = 1..=N_0`.
    pub mean_fields: Vec<NodalField>,
    /// Unbiased sample variance of the final-time correction in the
    /// mass-weighted norm (zero for a single sample).
    pub sample_variance_l2: f64,
    /// Same in the gradient seminorm.
    pub sample_variance_h1: f64,
    /// Solver work over all group solves (fine and coarse).
    pub stats: SolveStats,
    /// Wall-clock seconds for the whole correction.
    pub seconds: f64,
    /// Energy-bound ledgers for every group solve.
    pub audits: Vec<GroupAudit>,
}

impl LevelCorrection {
    /// The final-time mean field.
    pub fn final_field(&self) -> &NodalField {
        self.mean_fields.last().expect("at least one shared time point")
    }
}

/// The telescoped estimate on the finest space.
#[derive(Debug)]
pub struct MlmcEstimate {
    /// Fields on the level-`L` space, one per shared time point.
    pub fields: Vec<NodalField>,
    /// Finest level `L`.
    pub level: usize,
    /// Replica index that produced the estimate.
    pub replica: u32,
    /// Root seed of the sample stream.
    pub seed: u64,
}

impl MlmcEstimate {
    /// The final-time field.
    pub fn final_field(&self) -> &NodalField {
        self.fields.last().expect("at least one shared time point")
    }
}

/// Meshes, spaces, operators, and transfer maps for all levels of a schedule.
pub struct MlmcHierarchy {
    /// The plan this hierarchy realizes.
    pub schedule: LevelSchedule,
    /// Final time `T`.
    pub final_time: f64,
    /// Steps on the shared (level-0) time grid, `N_0 = T / dt_0`.
    pub shared_steps: usize,
    levels: Vec<SpaceOperators>,
    /// `adjacent[l-1]` maps level `l-1` values onto the level-`l` space.
    adjacent: Vec<InterpolationOperator>,
    /// `to_top[l]` maps level-`l` values onto the finest space (`l < L`).
    to_top: Vec<InterpolationOperator>,
}

impl MlmcHierarchy {
    /// Builds all levels of `schedule` with FE degree `degree`.
    pub fn new(schedule: LevelSchedule, degree: usize, final_time: f64) -> Result<Self> {
        let top = schedule.max_level();
        let shared_steps = time_steps(schedule.entries[0].dt, final_time)?;
        let meshes = build_hierarchy(schedule.entries[0].h, top)?;
        let mut spaces = Vec::with_capacity(top + 1);
        for mesh in meshes {
            spaces.push(FeSpace::new(mesh, degree)?);
        }
        let mut adjacent = Vec::with_capacity(top);
        let mut to_top = Vec::with_capacity(top);
        for l in 1..=top {
            adjacent.push(InterpolationOperator::new(&spaces[l - 1], &spaces[l])?);
        }
        for l in 0..top {
            to_top.push(InterpolationOperator::new(&spaces[l], &spaces[top])?);
        }
        let levels = spaces.into_iter().map(SpaceOperators::new).collect();
        Ok(MlmcHierarchy { schedule, final_time, shared_steps, levels, adjacent, to_top })
    }

    /// Finest level index.
    pub fn max_level(&self) -> usize {
        self.schedule.max_level()
    }

    /// Space-wide operators of one level.
    pub fn ops(&self, level: usize) -> &SpaceOperators {
        &self.levels[level]
    }

    /// Finite element space of one level.
    pub fn space(&self, level: usize) -> &FeSpace {
        &self.levels[level].space
    }

    /// The shared time points `t_k = k dt_0`, `k = 1..=N_0`.
    pub fn shared_times(&self) -> Vec<f64> {
        let dt0 = self.schedule.entries[0].dt;
        (1..=self.shared_steps).map(|k| k as f64 * dt0).collect()
    }

    /// Interpolates level-`l` nodal values onto the finest space.
    pub fn lift_to_top(&self, level: usize, values: &[f64]) -> Vec<f64> {
        if level == self.max_level() {
            values.to_vec()
        } else {
            self.to_top[level].apply(values)
        }
    }

    /// Draws the sample batch for `(level, replica)` from the stream.
    fn draw_samples(
        &self,
        problem: &Problem,
        stream: &SampleStream,
        replica: u32,
        level: usize,
        count: usize,
    ) -> Vec<SampleData> {
        let dims = problem.n_random_dims();
        (0..count)
            .map(|j| problem.sample(&stream.uniform_sym_vec(level as u32, replica, j as u64, dims)))
            .collect()
    }

    /// The level-`l` correction `Psi_{J_l}[u_l - u_{l-1}]` (level 0 omits the
    /// subtraction), with the schedule's sample count.
    pub fn run_level_correction(
        &self,
        problem: &Problem,
        stream: &SampleStream,
        replica: u32,
        level: usize,
        opts: &RunOptions,
    ) -> Result<LevelCorrection> {
        let count = self.schedule.entries[level].samples;
        let samples = self.draw_samples(problem, stream, replica, level, count);
        self.correction_from_samples(level, &samples, level > 0, opts)
    }

    /// Plain single-level ensemble Monte Carlo mean over `count` samples.
    pub fn single_level_mc(
        &self,
        problem: &Problem,
        stream: &SampleStream,
        replica: u32,
        level: usize,
        count: usize,
        opts: &RunOptions,
    ) -> Result<LevelCorrection> {
        let samples = self.draw_samples(problem, stream, replica, level, count);
        self.correction_from_samples(level, &samples, false, opts)
    }

    /// Shared implementation: group, solve (optionally with the coarse
    /// companion), and average in ascending sample order.
    fn correction_from_samples(
        &self,
        level: usize,
        samples: &[SampleData],
        subtract_coarse: bool,
        opts: &RunOptions,
    ) -> Result<LevelCorrection> {
        let started = Instant::now();
        let entry = self.schedule.entries[level];
        let count = samples.len();
        let ops = self.ops(level);
        let n_dofs = ops.space.n_dofs();

        // Stability grouping on the finest mesh of the pair.
        let coefficients: Vec<CoefficientSample> =
            samples.iter().map(|s| s.coefficient.clone()).collect();
        let mut probe_points = ops.quadrature_points().to_vec();
        probe_points.extend(probe_lattice());
        let probes = StabilityProbes::for_family(&coefficients[0], &probe_points);
        let groups = if opts.singleton_groups {
            coefficients
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let estimate = estimate_stability(&coefficients, &[j], c, &probes);
                    if !estimate.is_stable() {
                        return Err(Error::CoefficientNotPositive {
                            lower_bound: estimate.theta_hat,
                        });
                    }
                    Ok(EnsembleGroup { members: vec![j], mean: c.clone(), estimate })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.with_context(format!("level {level} singleton split")))?
        } else {
            partition_stable(&coefficients, &probes)
                .map_err(|e| e.with_context(format!("level {level} stability split")))?
        };

        // Snapshot step indices realizing the shared time grid on each level.
        let fine_steps: Vec<usize> =
            (1..=self.shared_steps).map(|k| k << level).collect();
        let coarse_steps: Vec<usize> = if subtract_coarse {
            (1..=self.shared_steps).map(|k| k << (level - 1)).collect()
        } else {
            Vec::new()
        };

        let mut sample_to_slot = vec![(0usize, 0usize); count];
        for (gi, group) in groups.iter().enumerate() {
            for (pos, &member) in group.members.iter().enumerate() {
                sample_to_slot[member] = (gi, pos);
            }
        }

        let mut stats = SolveStats::default();
        let mut audits = Vec::new();
        let mut fine_runs = Vec::with_capacity(groups.len());
        let mut coarse_runs = Vec::with_capacity(groups.len());
        for (gi, group) in groups.iter().enumerate() {
            let member_data: Vec<SampleData> =
                group.members.iter().map(|&m| samples[m].clone()).collect();
            let fine_cfg = StepperConfig {
                dt: entry.dt,
                final_time: self.final_time,
                bootstrap: opts.bootstrap,
                solver: opts.solver.clone(),
            };
            let fine = run_group(ops, &member_data, &group.mean, &group.estimate, &fine_cfg, &fine_steps)
                .map_err(|e| e.with_context(format!("level {level} group {gi}")))?;
            stats.absorb(&fine.stats);
            audits.push(GroupAudit {
                level,
                companion: false,
                group: gi,
                members: group.members.len(),
                trace: fine.audit_trace.clone(),
            });
            fine_runs.push(fine);

            if subtract_coarse {
                let coarse_cfg = StepperConfig {
                    dt: 2.0 * entry.dt,
                    final_time: self.final_time,
                    bootstrap: opts.bootstrap,
                    solver: opts.solver.clone(),
                };
                let coarse = run_group(
                    self.ops(level - 1),
                    &member_data,
                    &group.mean,
                    &group.estimate,
                    &coarse_cfg,
                    &coarse_steps,
                )
                .map_err(|e| e.with_context(format!("level {level} group {gi} companion")))?;
                stats.absorb(&coarse.stats);
                audits.push(GroupAudit {
                    level: level - 1,
                    companion: true,
                    group: gi,
                    members: group.members.len(),
                    trace: coarse.audit_trace.clone(),
                });
                coarse_runs.push(coarse);
            }
        }

        // Average per-sample differences in ascending sample order so the
        // result is independent of how the groups were laid out.
        let inv_count = 1.0 / count as f64;
        let mut mean_fields = Vec::with_capacity(self.shared_steps);
        let mut final_diffs: Vec<Vec<f64>> = Vec::new();
        for k in 0..self.shared_steps {
            let mut acc = vec![0.0; n_dofs];
            let last = k + 1 == self.shared_steps;
            for (gi, pos) in sample_to_slot.iter().copied() {
                let fine_col = fine_runs[gi].snapshots[k].col(pos);
                let diff = if subtract_coarse {
                    let lifted = self.adjacent[level - 1].apply(coarse_runs[gi].snapshots[k].col(pos));
                    fine_col.iter().zip(&lifted).map(|(f, c)| f - c).collect::<Vec<f64>>()
                } else {
                    fine_col.to_vec()
                };
                for (a, d) in acc.iter_mut().zip(&diff) {
                    *a += d;
                }
                if last {
                    final_diffs.push(diff);
                }
            }
            for a in acc.iter_mut() {
                *a *= inv_count;
            }
            mean_fields.push(NodalField::from_values(&ops.space, acc)?);
        }

        let mean_final = &mean_fields.last().expect("shared grid nonempty").values;
        let (mut var_l2, mut var_h1) = (0.0, 0.0);
        if count > 1 {
            let mut centered = vec![0.0; n_dofs];
            for diff in &final_diffs {
                for ((c, d), m) in centered.iter_mut().zip(diff).zip(mean_final) {
                    *c = d - m;
                }
                var_l2 += ops.mass.quadratic_form(&centered);
                var_h1 += ops.a_unit.quadratic_form(&centered);
            }
            var_l2 /= (count - 1) as f64;
            var_h1 /= (count - 1) as f64;
        }

        Ok(LevelCorrection {
            level,
            samples: count,
            groups: groups.len(),
            mean_fields,
            sample_variance_l2: var_l2,
            sample_variance_h1: var_h1,
            stats,
            seconds: started.elapsed().as_secs_f64(),
            audits,
        })
    }

    /// Telescopes one correction per level into the finest-space estimate.
    pub fn combine(
        &self,
        corrections: &[LevelCorrection],
        replica: u32,
        seed: u64,
    ) -> Result<MlmcEstimate> {
        let top = self.max_level();
        if corrections.len() != top + 1 {
            return Err(Error::InvalidArgument(format!(
                "estimator needs {} level corrections, got {}",
                top + 1,
                corrections.len()
            )));
        }
        for (l, c) in corrections.iter().enumerate() {
            if c.level != l {
                return Err(Error::InvalidArgument(format!(
                    "correction at position {l} is for level {}",
                    c.level
                )));
            }
        }
        let n_top = self.space(top).n_dofs();
        let mut fields = Vec::with_capacity(self.shared_steps);
        for k in 0..self.shared_steps {
            let mut acc = vec![0.0; n_top];
            for (l, correction) in corrections.iter().enumerate() {
                let lifted = self.lift_to_top(l, &correction.mean_fields[k].values);
                for (a, v) in acc.iter_mut().zip(&lifted) {
                    *a += v;
                }
            }
            fields.push(NodalField::from_values(self.space(top), acc)?);
        }
        Ok(MlmcEstimate { fields, level: top, replica, seed })
    }

    /// Runs all level corrections for one replica and telescopes them.
    pub fn run_estimate(
        &self,
        problem: &Problem,
        stream: &SampleStream,
        replica: u32,
        opts: &RunOptions,
    ) -> Result<(MlmcEstimate, Vec<LevelCorrection>)> {
        let corrections: Vec<LevelCorrection> = (0..=self.max_level())
            .map(|l| self.run_level_correction(problem, stream, replica, l, opts))
            .collect::<Result<_>>()?;
        let estimate = self.combine(&corrections, replica, stream.seed())?;
        Ok((estimate, corrections))
    }
}
