//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building meshes, assembling, solving,
/// sampling, or running experiments.
#[derive(Debug, Error)]
pub enum Error {
    /// Requested coarse mesh size is not `sqrt(2)/n` for a positive integer `n`.
    #[error("h0 = {h0} is not sqrt(2)/n for an integer n; nearest admissible n = {nearest} (h = {admissible})")]
    MeshSizeNotAdmissible {
        h0: f64,
        nearest: u32,
        admissible: f64,
    },

    /// A point handed to point location lies outside the closed unit square.
    #[error("point ({x}, {y}) lies outside the unit square")]
    PointOutsideDomain { x: f64, y: f64 },

    /// Two finite element spaces do not belong to one nested hierarchy.
    #[error("spaces are not nested: {detail}")]
    SpacesNotNested { detail: String },

    /// An iterative solve ran out of iterations.
    #[error("linear solver failed to converge within {max_iter} iterations (worst relative residual {worst_residual:.3e})")]
    SolverMaxIter { max_iter: usize, worst_residual: f64 },

    /// Dense Cholesky hit a non-positive pivot: the matrix is not SPD.
    #[error("matrix is not positive definite: pivot {pivot:.3e} at index {index}")]
    NotPositiveDefinite { pivot: f64, index: usize },

    /// Dense factorization refused because the system is too large.
    #[error("dense solve of dimension {dim} exceeds the dense-work guard ({limit})")]
    DenseDimensionGuard { dim: usize, limit: usize },

    /// A coefficient sample is not strictly positive on the domain.
    #[error("diffusion coefficient is not strictly positive: lower bound {lower_bound:.6e}")]
    CoefficientNotPositive { lower_bound: f64 },

    /// Group coercivity estimate failed (non-positive minimum over probes).
    #[error("ensemble group has non-positive coercivity estimate theta_hat = {theta_hat:.6e}")]
    GroupNotCoercive { theta_hat: f64 },

    /// A requested operation needs an exact solution the problem does not carry.
    #[error("problem provides no closed-form solution for `{what}`")]
    MissingExactSolution { what: &'static str },

    /// Mismatched operand shapes in linear algebra.
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },

    /// Invalid or inconsistent run configuration.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Invalid argument to a numerical routine.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Filesystem problems while writing reports.
    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A failure wrapped with where-it-happened context.
    #[error("{detail}: {source}")]
    WithContext {
        detail: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MeshSizeNotAdmissible { .. } => "mesh_size",
            Error::PointOutsideDomain { .. } => "point_outside_domain",
            Error::SpacesNotNested { .. } => "spaces_not_nested",
            Error::SolverMaxIter { .. } => "solver_max_iter",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::DenseDimensionGuard { .. } => "dense_dimension_guard",
            Error::CoefficientNotPositive { .. } => "coefficient_not_positive",
            Error::GroupNotCoercive { .. } => "group_not_coercive",
            Error::MissingExactSolution { .. } => "missing_exact_solution",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Config { .. } => "config",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io { .. } => "io",
            Error::WithContext { source, .. } => source.kind(),
        }
    }

    /// Wraps the error with a `where it happened` prefix.
    pub fn with_context(self, detail: impl Into<String>) -> Error {
        Error::WithContext { detail: detail.into(), source: Box::new(self) }
    }
}
