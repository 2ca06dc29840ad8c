//! Transfer of nodal fields between nested spaces on the structured mesh
//! hierarchy.
//!
//! The fine space contains the coarse one whenever both use the same degree
//! and the fine subdivision count is a power-of-two multiple of the coarse
//! one, so nodal interpolation from coarse to fine reproduces coarse fields
//! exactly. Multilevel corrections from every level are mapped through these
//! operators onto the finest space before they are summed.

use crate::linalg::{SparseRect, TripletBuilder};
use crate::space::FeSpace;
use crate::{Error, Result};

/// Sparse nodal interpolation from a coarse space into a fine one.
pub struct InterpolationOperator {
    matrix: SparseRect,
}

impl InterpolationOperator {
    /// Builds the operator, verifying the spaces are nested.
    pub fn new(coarse: &FeSpace, fine: &FeSpace) -> Result<Self> {
        if coarse.degree != fine.degree {
            return Err(Error::SpacesNotNested {
                detail: format!(
                    "degree {} space cannot transfer into degree {} space",
                    coarse.degree, fine.degree
                ),
            });
        }
        let (nc, nf) = (coarse.mesh.n_side, fine.mesh.n_side);
        if nf % nc != 0 || !(nf / nc).is_power_of_two() {
            return Err(Error::SpacesNotNested {
                detail: format!("{nf} cells per side is not a power-of-two refinement of {nc}"),
            });
        }

        let mut builder = TripletBuilder::new(fine.n_dofs(), coarse.n_dofs());
        for (d, &[x, y]) in fine.dof_coords.iter().enumerate() {
            let (t, bary) = coarse.mesh.locate_point(x, y)?;
            let vals = coarse.basis_values(bary);
            let dofs = coarse.element_dofs(t);
            for k in 0..coarse.local_dofs() {
                if vals[k].abs() > 1e-12 {
                    builder.add(d, dofs[k], vals[k]);
                }
            }
        }
        Ok(InterpolationOperator { matrix: builder.build_rect() })
    }

    /// Applies the operator to coarse nodal values.
    pub fn apply(&self, coarse_values: &[f64]) -> Vec<f64> {
        self.matrix.matvec(coarse_values)
    }

    /// Fine-space dof count.
    pub fn n_fine(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Coarse-space dof count.
    pub fn n_coarse(&self) -> usize {
        self.matrix.n_cols()
    }

    /// Largest number of coarse dofs feeding one fine dof.
    pub fn max_row_entries(&self) -> usize {
        self.matrix.max_row_entries()
    }
}
