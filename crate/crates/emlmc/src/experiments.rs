//! Batch experiment drivers behind the CLI: the convergence study, the
//! shared-matrix vs per-sample pipeline comparison, and generic runs.

use std::path::Path;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::mlmc::{
    make_schedule, LevelCorrection, MlmcEstimate, MlmcHierarchy, RunOptions, ScheduleKind,
};
use crate::norms::{discrete_l2, h1_semi_error, l2_error};
use crate::problem::Problem;
use crate::quadrature::QuadratureRule;
use crate::report::{
    fill_rates, write_convergence, write_energy_audit, write_field_diff, write_levels, AuditRow,
    ConvergenceRow, LevelRow,
};
use crate::sampling::SampleStream;
use crate::space::NodalField;
use crate::vtk::write_vtk;
use crate::{Error, Result};

/// One replica's estimate together with its per-level bookkeeping.
type Outcome = (MlmcEstimate, Vec<LevelCorrection>);

/// Runs every replica of one estimator (in parallel, results in replica order).
fn run_replicas(
    hierarchy: &MlmcHierarchy,
    problem: &Problem,
    stream: &SampleStream,
    replicas: usize,
    opts: &RunOptions,
    context: &str,
) -> Result<Vec<Outcome>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            hierarchy
                .run_estimate(problem, stream, r as u32, opts)
                .map_err(|e| e.with_context(format!("{context} replica {r}")))
        })
        .collect()
}

/// Pointwise average of same-length nodal fields.
fn average_fields(fields: &[&NodalField]) -> NodalField {
    let mut acc = vec![0.0; fields[0].values.len()];
    for f in fields {
        for (a, v) in acc.iter_mut().zip(&f.values) {
            *a += v;
        }
    }
    let scale = 1.0 / fields.len() as f64;
    for a in &mut acc {
        *a *= scale;
    }
    NodalField { values: acc }
}

/// Flattens the energy ledgers of all replicas into report rows.
fn audit_rows(context: &str, outcomes: &[Outcome]) -> Vec<AuditRow> {
    let mut rows = Vec::new();
    for (replica, (_, corrections)) in outcomes.iter().enumerate() {
        for c in corrections {
            for audit in &c.audits {
                for (i, entry) in audit.trace.iter().enumerate() {
                    rows.push(AuditRow {
                        context: context.to_string(),
                        replica,
                        level: audit.level,
                        companion: audit.companion,
                        group: audit.group,
                        step: i + 1,
                        lhs: entry.lhs,
                        rhs: entry.rhs,
                        theta_hat: entry.theta_hat,
                        theta_plus: entry.theta_plus,
                    });
                }
            }
        }
    }
    rows
}

/// Per-level summary rows aggregated over replicas.
fn level_table(hierarchy: &MlmcHierarchy, outcomes: &[Outcome]) -> Vec<LevelRow> {
    let r = outcomes.len() as f64;
    (0..=hierarchy.max_level())
        .map(|l| {
            let entry = hierarchy.schedule.entries[l];
            let mass = &hierarchy.ops(l).mass;
            let mut norm = 0.0;
            let mut variance = 0.0;
            let mut iterations = 0u64;
            let mut wall = 0.0;
            for (_, corrections) in outcomes {
                let c = &corrections[l];
                norm += discrete_l2(mass, &c.final_field().values);
                variance += c.sample_variance_l2;
                iterations += c.stats.iterations as u64;
                wall += c.seconds;
            }
            LevelRow {
                level: l,
                h: entry.h,
                dt: entry.dt,
                samples: entry.samples,
                groups: outcomes[0].1[l].groups,
                correction_norm: norm / r,
                sample_variance: variance / r,
                solver_iterations: iterations,
                wall_seconds: wall,
            }
        })
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|source| Error::Io { path: dir.display().to_string(), source })
}

/// Everything the convergence study measures.
#[derive(Debug)]
pub struct ConvergenceReport {
    /// One row per finest level `L = 1..=levels`.
    pub rows: Vec<ConvergenceRow>,
    /// Per-level tables, one per `L`.
    pub tables: Vec<(usize, Vec<LevelRow>)>,
    /// Energy ledger of every solve.
    pub audits: Vec<AuditRow>,
}

/// Measures mean-field errors against the closed-form mean for increasing `L`.
///
/// Emits `convergence.csv`, `levels_<L>.csv` per `L`, and `energy_audit.csv`
/// (plus `psi_E.vtk` of the finest replica-averaged field when VTK is on).
pub fn run_convergence(config: &RunConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let problem = config.problem();
    let mean = problem.mean_exact().ok_or_else(|| Error::Config {
        path: "run.problem".into(),
        message: "the convergence study needs a problem with a closed-form mean".into(),
    })?;
    let opts = config.run_options();
    let stream = SampleStream::new(config.seed);
    let rule = QuadratureRule::degree8();
    if config.emit_csv || config.emit_vtk {
        ensure_dir(&config.output_dir)?;
    }

    let mut rows = Vec::new();
    let mut tables = Vec::new();
    let mut audits = Vec::new();
    for top in 1..=config.levels {
        // Explicit count lists are sized for the full study; each partial
        // estimator uses the matching prefix.
        let kind = match &config.schedule {
            ScheduleKind::Explicit { counts } if counts.len() > top + 1 => {
                ScheduleKind::Explicit { counts: counts[..=top].to_vec() }
            }
            other => other.clone(),
        };
        let schedule =
            make_schedule(&kind, config.h0, config.dt0, top, config.j_final, config.degree)?;
        let hierarchy = MlmcHierarchy::new(schedule, config.degree, config.final_time)?;
        let outcomes =
            run_replicas(&hierarchy, &problem, &stream, config.replicas, &opts, &format!("L{top}"))?;

        let space = hierarchy.space(top);
        let times = hierarchy.shared_times();
        let final_time = config.final_time;
        let mut sum_l2_sq = 0.0;
        let mut sum_h1_sq = 0.0;
        for (estimate, _) in &outcomes {
            let e = l2_error(
                space,
                estimate.final_field(),
                |x, y| (mean.value)(x, y, final_time),
                &rule,
            );
            sum_l2_sq += e * e;
            for (k, &t) in times.iter().enumerate() {
                let g =
                    h1_semi_error(space, &estimate.fields[k], |x, y| (mean.gradient)(x, y, t), &rule);
                sum_h1_sq += g * g;
            }
        }
        let r = config.replicas as f64;
        rows.push(ConvergenceRow {
            level: top,
            e_l2: (sum_l2_sq / r).sqrt(),
            rate_l2: None,
            e_h1: (sum_h1_sq / (r * times.len() as f64)).sqrt(),
            rate_h1: None,
        });
        tables.push((top, level_table(&hierarchy, &outcomes)));
        audits.extend(audit_rows(&format!("L{top}"), &outcomes));

        if top == config.levels && config.emit_vtk {
            let finals: Vec<&NodalField> =
                outcomes.iter().map(|(e, _)| e.final_field()).collect();
            write_vtk(
                &config.output_dir.join("psi_E.vtk"),
                space,
                &average_fields(&finals),
                "psi_E",
            )?;
        }
    }
    fill_rates(&mut rows);

    if config.emit_csv {
        write_convergence(&config.output_dir.join("convergence.csv"), &rows)?;
        for (top, table) in &tables {
            write_levels(&config.output_dir.join(format!("levels_{top}.csv")), table)?;
        }
        write_energy_audit(&config.output_dir.join("energy_audit.csv"), &audits)?;
    }
    Ok(ConvergenceReport { rows, tables, audits })
}

/// Accumulated cost of one pipeline.
#[derive(Clone, Copy, Debug, Default)]
pub struct PipelineCost {
    /// Seconds preparing and solving the linear systems.
    pub solve_seconds: f64,
    /// Seconds assembling matrices, loads, and boundary data.
    pub assembly_seconds: f64,
    /// Raw wall-clock total including sampling and accumulation.
    pub total_seconds: f64,
}

fn pipeline_cost(outcomes: &[Outcome]) -> PipelineCost {
    let mut cost = PipelineCost::default();
    for (_, corrections) in outcomes {
        for c in corrections {
            cost.solve_seconds += c.stats.solve_seconds;
            cost.assembly_seconds += c.stats.assembly_seconds;
            cost.total_seconds += c.seconds;
        }
    }
    cost
}

/// Outcome of the shared-matrix vs per-sample comparison.
#[derive(Debug)]
pub struct CompareReport {
    /// Largest nodal difference between the two final fields over replicas.
    pub sup_diff: f64,
    /// Cost of the shared-matrix (grouped) pipeline.
    pub ensemble_cost: PipelineCost,
    /// Cost of the per-sample (singleton) pipeline.
    pub independent_cost: PipelineCost,
    /// Replica-averaged final field of the grouped pipeline.
    pub psi_ensemble: NodalField,
    /// Replica-averaged final field of the singleton pipeline.
    pub psi_independent: NodalField,
    /// Per-level table of the grouped pipeline.
    pub table: Vec<LevelRow>,
    /// Energy ledgers of both pipelines.
    pub audits: Vec<AuditRow>,
}

/// Runs the estimator twice on identical samples: once with shared-matrix
/// groups, once with one matrix per sample, and reports field gap and cost.
///
/// Emits `psi_E.vtk`, `psi_I.vtk`, `diff.csv`, `levels_<L>.csv`,
/// and `energy_audit.csv`.
pub fn run_compare(config: &RunConfig) -> Result<CompareReport> {
    config.validate()?;
    let problem = config.problem();
    let stream = SampleStream::new(config.seed);
    let hierarchy = MlmcHierarchy::new(config.schedule()?, config.degree, config.final_time)?;
    let shared_opts = config.run_options();
    let singleton_opts = RunOptions { singleton_groups: true, ..shared_opts.clone() };

    // The pipelines run one after the other so their timings never contend.
    let ensemble =
        run_replicas(&hierarchy, &problem, &stream, config.replicas, &shared_opts, "ensemble")?;
    let independent = run_replicas(
        &hierarchy,
        &problem,
        &stream,
        config.replicas,
        &singleton_opts,
        "independent",
    )?;

    let mut sup_diff = 0.0f64;
    for ((e, _), (i, _)) in ensemble.iter().zip(&independent) {
        let gap = e
            .final_field()
            .values
            .iter()
            .zip(&i.final_field().values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        sup_diff = sup_diff.max(gap);
    }
    let psi_ensemble =
        average_fields(&ensemble.iter().map(|(e, _)| e.final_field()).collect::<Vec<_>>());
    let psi_independent =
        average_fields(&independent.iter().map(|(e, _)| e.final_field()).collect::<Vec<_>>());
    let table = level_table(&hierarchy, &ensemble);
    let mut audits = audit_rows("ensemble", &ensemble);
    audits.extend(audit_rows("independent", &independent));

    let top = hierarchy.max_level();
    if config.emit_csv || config.emit_vtk {
        ensure_dir(&config.output_dir)?;
    }
    if config.emit_vtk {
        write_vtk(&config.output_dir.join("psi_E.vtk"), hierarchy.space(top), &psi_ensemble, "psi_E")?;
        write_vtk(
            &config.output_dir.join("psi_I.vtk"),
            hierarchy.space(top),
            &psi_independent,
            "psi_I",
        )?;
    }
    if config.emit_csv {
        write_field_diff(
            &config.output_dir.join("diff.csv"),
            hierarchy.space(top),
            &psi_ensemble,
            &psi_independent,
        )?;
        write_levels(&config.output_dir.join(format!("levels_{top}.csv")), &table)?;
        write_energy_audit(&config.output_dir.join("energy_audit.csv"), &audits)?;
    }

    Ok(CompareReport {
        sup_diff,
        ensemble_cost: pipeline_cost(&ensemble),
        independent_cost: pipeline_cost(&independent),
        psi_ensemble,
        psi_independent,
        table,
        audits,
    })
}

/// Outcome of a generic config-driven run.
#[derive(Debug)]
pub struct CustomReport {
    /// Replica-averaged final field on the finest space.
    pub mean_final: NodalField,
    /// Per-replica estimates.
    pub estimates: Vec<MlmcEstimate>,
    /// Per-level table aggregated over replicas.
    pub table: Vec<LevelRow>,
    /// Energy ledger of every solve.
    pub audits: Vec<AuditRow>,
}

/// Runs the estimator exactly as configured and dumps the reports.
///
/// Emits `levels_<L>.csv` and `energy_audit.csv` (and `psi_E.vtk` when on).
pub fn run_custom(config: &RunConfig) -> Result<CustomReport> {
    config.validate()?;
    let problem = config.problem();
    let stream = SampleStream::new(config.seed);
    let hierarchy = MlmcHierarchy::new(config.schedule()?, config.degree, config.final_time)?;
    let opts = config.run_options();
    let outcomes = run_replicas(&hierarchy, &problem, &stream, config.replicas, &opts, "run")?;

    let table = level_table(&hierarchy, &outcomes);
    let audits = audit_rows("run", &outcomes);
    let mean_final =
        average_fields(&outcomes.iter().map(|(e, _)| e.final_field()).collect::<Vec<_>>());

    let top = hierarchy.max_level();
    if config.emit_csv || config.emit_vtk {
        ensure_dir(&config.output_dir)?;
    }
    if config.emit_vtk {
        write_vtk(&config.output_dir.join("psi_E.vtk"), hierarchy.space(top), &mean_final, "psi_E")?;
    }
    if config.emit_csv {
        write_levels(&config.output_dir.join(format!("levels_{top}.csv")), &table)?;
        write_energy_audit(&config.output_dir.join("energy_audit.csv"), &audits)?;
    }

    let estimates = outcomes.into_iter().map(|(e, _)| e).collect();
    Ok(CustomReport { mean_final, estimates, table, audits })
}
