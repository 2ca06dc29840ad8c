//! CSV report writers: header row, fixed column order, full-precision floats.

use std::io::Write;
use std::path::Path;

use crate::space::{FeSpace, NodalField};
use crate::{Error, Result};

/// Formats a float with 17 significant digits (lossless for f64).
pub fn float_cell(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a whole CSV file at once (header plus rows).
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io { path: path.display().to_string(), source };
    let mut buffer = Vec::new();
    writeln!(buffer, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "row width must match the header");
        writeln!(buffer, "{}", row.join(",")).map_err(io_err)?;
    }
    std::fs::write(path, buffer).map_err(io_err)
}

/// One line of the convergence table.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    /// Finest level of the estimator.
    pub level: usize,
    /// Root-mean final-time mean-field error.
    pub e_l2: f64,
    /// `log2` ratio against the previous row (absent on the first row).
    pub rate_l2: Option<f64>,
    /// Root-mean gradient error over the shared time grid.
    pub e_h1: f64,
    /// `log2` ratio against the previous row (absent on the first row).
    pub rate_h1: Option<f64>,
}

/// Fills the rate columns of a convergence table from its error columns.
pub fn fill_rates(rows: &mut [ConvergenceRow]) {
    for i in 0..rows.len() {
        if i == 0 {
            rows[i].rate_l2 = None;
            rows[i].rate_h1 = None;
        } else {
            rows[i].rate_l2 = Some((rows[i - 1].e_l2 / rows[i].e_l2).log2());
            rows[i].rate_h1 = Some((rows[i - 1].e_h1 / rows[i].e_h1).log2());
        }
    }
}

/// Writes `convergence.csv`.
pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    let header = ["L", "E_L2", "rate_L2", "E_H1", "rate_H1"];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                float_cell(r.e_l2),
                r.rate_l2.map(float_cell).unwrap_or_default(),
                float_cell(r.e_h1),
                r.rate_h1.map(float_cell).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(path, &header, &body)
}

/// One line of the per-level report.
#[derive(Clone, Debug)]
pub struct LevelRow {
    /// Level index.
    pub level: usize,
    /// Mesh size.
    pub h: f64,
    /// Time step.
    pub dt: f64,
    /// Sample count.
    pub samples: usize,
    /// Stable groups after splitting.
    pub groups: usize,
    /// Final-time norm of the mean level correction.
    pub correction_norm: f64,
    /// Unbiased sample variance of the final-time correction.
    pub sample_variance: f64,
    /// Total linear-solver iterations (0 under the direct solver).
    pub solver_iterations: u64,
    /// Wall-clock seconds spent on this level.
    pub wall_seconds: f64,
}

/// Writes `levels_<L>.csv`.
pub fn write_levels(path: &Path, rows: &[LevelRow]) -> Result<()> {
    let header = [
        "l",
        "h_l",
        "dt_l",
        "J_l",
        "groups",
        "correction_norm",
        "sample_variance",
        "solver_iterations",
        "wall_time",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                float_cell(r.h),
                float_cell(r.dt),
                r.samples.to_string(),
                r.groups.to_string(),
                float_cell(r.correction_norm),
                float_cell(r.sample_variance),
                r.solver_iterations.to_string(),
                float_cell(r.wall_seconds),
            ]
        })
        .collect();
    write_csv(path, &header, &body)
}

/// One per-step line of the energy ledger.
#[derive(Clone, Debug)]
pub struct AuditRow {
    /// Which run produced the row (estimator level or pipeline name).
    pub context: String,
    /// Replica index.
    pub replica: usize,
    /// Level of the solve.
    pub level: usize,
    /// True when the row comes from a coarse companion solve.
    pub companion: bool,
    /// Stable-group index within the level.
    pub group: usize,
    /// Completed step index (1 = first recorded state).
    pub step: usize,
    /// Stability-bound left-hand side at this step.
    pub lhs: f64,
    /// Stability-bound right-hand side at this step.
    pub rhs: f64,
    /// Group coercivity estimate.
    pub theta_hat: f64,
    /// Group deviation bound.
    pub theta_plus: f64,
}

/// Writes `energy_audit.csv`.
pub fn write_energy_audit(path: &Path, rows: &[AuditRow]) -> Result<()> {
    let header = [
        "context",
        "replica",
        "level",
        "companion",
        "group",
        "step",
        "lhs",
        "rhs",
        "theta_hat",
        "theta_plus",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.context.clone(),
                r.replica.to_string(),
                r.level.to_string(),
                r.companion.to_string(),
                r.group.to_string(),
                r.step.to_string(),
                float_cell(r.lhs),
                float_cell(r.rhs),
                float_cell(r.theta_hat),
                float_cell(r.theta_plus),
            ]
        })
        .collect();
    write_csv(path, &header, &body)
}

/// Writes a nodal field as `x,y,value` rows over every dof.
pub fn write_field(path: &Path, space: &FeSpace, field: &NodalField) -> Result<()> {
    let header = ["x", "y", "value"];
    let body: Vec<Vec<String>> = space
        .dof_coords
        .iter()
        .zip(&field.values)
        .map(|(xy, v)| vec![float_cell(xy[0]), float_cell(xy[1]), float_cell(*v)])
        .collect();
    write_csv(path, &header, &body)
}

/// Writes `diff.csv`: both fields and their difference over every dof.
pub fn write_field_diff(
    path: &Path,
    space: &FeSpace,
    ensemble: &NodalField,
    independent: &NodalField,
) -> Result<()> {
    let header = ["x", "y", "ensemble", "independent", "diff"];
    let body: Vec<Vec<String>> = space
        .dof_coords
        .iter()
        .zip(ensemble.values.iter().zip(&independent.values))
        .map(|(xy, (a, b))| {
            vec![
                float_cell(xy[0]),
                float_cell(xy[1]),
                float_cell(*a),
                float_cell(*b),
                float_cell(a - b),
            ]
        })
        .collect();
    write_csv(path, &header, &body)
}
