//! Dirichlet boundary handling by reduction to the interior unknowns.
//!
//! States are kept in full nodal numbering with boundary entries pinned to
//! the boundary data; solves happen on the interior block. For a system
//! matrix `A` split into interior/boundary blocks, the reduced problem is
//! `A_II x_I = b_I - A_IB g`, and the full state is recovered by scattering
//! `x_I` and `g` back to their positions.

use crate::linalg::{SparseRect, SpdOperator};
use crate::space::FeSpace;

/// Interior block and boundary coupling of one system matrix.
pub struct DirichletSystem {
    /// Interior dof indices, ascending.
    pub interior: Vec<usize>,
    /// Boundary dof indices, ascending.
    pub boundary: Vec<usize>,
    /// `A_II`: the SPD operator actually handed to the solvers.
    pub matrix: SpdOperator,
    /// `A_IB`: maps boundary values to their interior load contribution.
    pub coupling: SparseRect,
}

impl DirichletSystem {
    /// Splits a full matrix over `space` into its interior/boundary blocks.
    pub fn new(space: &FeSpace, full: &SpdOperator) -> Self {
        let interior = space.interior_dofs.clone();
        let boundary = space.boundary_dofs.clone();
        let matrix = full.principal_submatrix(&interior);
        let coupling = full.submatrix(&interior, &boundary);
        DirichletSystem { interior, boundary, matrix, coupling }
    }

    /// Number of interior unknowns.
    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Picks the interior entries out of a full-length vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| full[i]).collect()
    }

    /// Reduced right-hand side: interior entries minus the boundary lift.
    pub fn reduce_rhs(&self, full_rhs: &[f64], boundary_values: &[f64]) -> Vec<f64> {
        let mut out = self.restrict(full_rhs);
        let lift = self.coupling.matvec(boundary_values);
        for (o, l) in out.iter_mut().zip(&lift) {
            *o -= l;
        }
        out
    }

    /// Scatters interior and boundary values back into a full-length vector.
    pub fn expand_into(&self, interior: &[f64], boundary_values: &[f64], out: &mut [f64]) {
        for (&i, &v) in self.interior.iter().zip(interior) {
            out[i] = v;
        }
        for (&i, &v) in self.boundary.iter().zip(boundary_values) {
            out[i] = v;
        }
    }

    /// `expand_into` onto a fresh vector.
    pub fn expand(&self, interior: &[f64], boundary_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.interior.len() + self.boundary.len()];
        self.expand_into(interior, boundary_values, &mut out);
        out
    }
}

/// Evaluates boundary data at the boundary dofs, in `space.boundary_dofs`
/// order.
pub fn boundary_values(space: &FeSpace, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    space
        .boundary_dofs
        .iter()
        .map(|&d| {
            let [x, y] = space.dof_coords[d];
            g(x, y)
        })
        .collect()
}
