//! Ensemble-based multilevel Monte Carlo (EMLMC) finite element solver for the
//! heat equation with a random diffusion coefficient on the unit square.
//!
//! The solver advances many coefficient samples at once with a BDF2 scheme whose
//! implicit operator uses the *group mean* coefficient, so every sample in a
//! group shares one SPD system matrix per time grid.  Per-sample deviations from
//! the mean enter explicitly through a time-lagged term, which turns each time
//! step into a single linear solve with a block of right-hand sides.  A
//! multilevel telescoping over nested mesh/time/sample-count levels combines the
//! ensemble runs into an estimate of the mean solution field.
//!
//! Module map:
//! - [`mesh`]: structured triangulations of the unit square and nested hierarchies
//! - [`quadrature`]: symmetric triangle rules (degree 5 for assembly, degree 8 for norms)
//! - [`space`]: Lagrange P1/P2 spaces and nodal fields
//! - [`linalg`]: sparse SPD operators, block conjugate gradients, dense Cholesky
//! - [`assemble`]: mass/stiffness/load assembly
//! - [`dirichlet`]: interior restriction and boundary lifts
//! - [`norms`]: L2 / H1-seminorm error integrals
//! - [`interpolate`]: nested coarse-to-fine transfer operators
//! - [`coefficient`], [`sampling`]: random diffusion coefficients and reproducible draws
//! - [`group`]: coercivity estimates, the stability condition, stable group splitting
//! - [`problem`]: per-sample problem data (forcing, boundary, initial, exact solutions)
//! - [`stepper`]: the shared-matrix ensemble BDF2 time stepper and its energy audit
//! - [`mlmc`]: level schedules, coupled level corrections, telescoped estimates
//! - [`config`], [`experiments`], [`report`], [`vtk`]: experiment drivers and output

pub mod assemble;
pub mod coefficient;
pub mod config;
pub mod dirichlet;
pub mod error;
pub mod experiments;
pub mod group;
pub mod interpolate;
pub mod linalg;
pub mod mesh;
pub mod mlmc;
pub mod norms;
pub mod problem;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod space;
pub mod stepper;
pub mod vtk;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
