//! Continuous Lagrange finite element spaces (P1 and P2) and nodal fields.
//!
//! Degrees of freedom are nodal values: vertices for P1, vertices followed by
//! edge midpoints for P2.  Local basis functions are expressed in barycentric
//! coordinates, so both values and (per-triangle constant-Jacobian) gradients
//! are cheap to evaluate at quadrature nodes.

use crate::error::Error;
use crate::mesh::{Side, TriMesh};
use crate::Result;

/// Maximum local dofs per triangle (P2).
pub const MAX_LOCAL_DOFS: usize = 6;

/// A Lagrange finite element space over a structured triangulation.
#[derive(Debug, Clone)]
pub struct FeSpace {
    /// The underlying triangulation.
    pub mesh: TriMesh,
    /// Polynomial degree, 1 or 2.
    pub degree: usize,
    /// Coordinates of every dof (vertices, then edge midpoints for P2).
    pub dof_coords: Vec<[f64; 2]>,
    /// Boundary side of each dof, `None` for interior dofs.
    pub dof_side: Vec<Option<Side>>,
    /// Indices of interior dofs in ascending order.
    pub interior_dofs: Vec<usize>,
    /// Indices of boundary dofs in ascending order.
    pub boundary_dofs: Vec<usize>,
}

impl FeSpace {
    /// Builds the space of the given degree over `mesh`.
    pub fn new(mesh: TriMesh, degree: usize) -> Result<Self> {
        if !(degree == 1 || degree == 2) {
            return Err(Error::InvalidArgument(format!(
                "unsupported element degree {degree}; only 1 and 2 are available"
            )));
        }
        let mut dof_coords = mesh.vertices.clone();
        let mut dof_side = mesh.vertex_side.clone();
        if degree == 2 {
            for e in 0..mesh.n_edges() {
                dof_coords.push(mesh.edge_midpoint(e));
                dof_side.push(mesh.edge_side[e]);
            }
        }
        let mut interior_dofs = Vec::new();
        let mut boundary_dofs = Vec::new();
        for (d, side) in dof_side.iter().enumerate() {
            if side.is_some() {
                boundary_dofs.push(d);
            } else {
                interior_dofs.push(d);
            }
        }
        Ok(FeSpace {
            mesh,
            degree,
            dof_coords,
            dof_side,
            interior_dofs,
            boundary_dofs,
        })
    }

    /// Total number of dofs.
    pub fn n_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    /// Number of local dofs per triangle.
    pub fn local_dofs(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    /// Global dof indices of triangle `t` in local order
    /// (vertices, then for P2 the midpoints of edges `(0,1), (1,2), (2,0)`).
    pub fn element_dofs(&self, t: usize) -> [usize; MAX_LOCAL_DOFS] {
        let tri = self.mesh.triangles[t];
        let mut dofs = [usize::MAX; MAX_LOCAL_DOFS];
        dofs[..3].copy_from_slice(&tri);
        if self.degree == 2 {
            let nv = self.mesh.n_vertices();
            let te = self.mesh.triangle_edges[t];
            for k in 0..3 {
                dofs[3 + k] = nv + te[k];
            }
        }
        dofs
    }

    /// Values of all local basis functions at a barycentric point.
    pub fn basis_values(&self, bary: [f64; 3]) -> [f64; MAX_LOCAL_DOFS] {
        let [l0, l1, l2] = bary;
        let mut vals = [0.0; MAX_LOCAL_DOFS];
        if self.degree == 1 {
            vals[0] = l0;
            vals[1] = l1;
            vals[2] = l2;
        } else {
            vals[0] = l0 * (2.0 * l0 - 1.0);
            vals[1] = l1 * (2.0 * l1 - 1.0);
            vals[2] = l2 * (2.0 * l2 - 1.0);
            vals[3] = 4.0 * l0 * l1;
            vals[4] = 4.0 * l1 * l2;
            vals[5] = 4.0 * l2 * l0;
        }
        vals
    }

    /// Cartesian gradients of the barycentric coordinates on triangle `t`.
    pub fn bary_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [pa, pb, pc] = self.mesh.triangle_coords(t);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        [
            [(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det],
            [(pc[1] - pa[1]) / det, (pa[0] - pc[0]) / det],
            [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det],
        ]
    }

    /// Cartesian gradients of all local basis functions at a barycentric point.
    pub fn basis_gradients(
        &self,
        bary: [f64; 3],
        bary_grad: &[[f64; 2]; 3],
    ) -> [[f64; 2]; MAX_LOCAL_DOFS] {
        let [l0, l1, l2] = bary;
        let g = bary_grad;
        let mut grads = [[0.0; 2]; MAX_LOCAL_DOFS];
        if self.degree == 1 {
            grads[0] = g[0];
            grads[1] = g[1];
            grads[2] = g[2];
        } else {
            for k in 0..2 {
                grads[0][k] = (4.0 * l0 - 1.0) * g[0][k];
                grads[1][k] = (4.0 * l1 - 1.0) * g[1][k];
                grads[2][k] = (4.0 * l2 - 1.0) * g[2][k];
                grads[3][k] = 4.0 * (l1 * g[0][k] + l0 * g[1][k]);
                grads[4][k] = 4.0 * (l2 * g[1][k] + l1 * g[2][k]);
                grads[5][k] = 4.0 * (l0 * g[2][k] + l2 * g[0][k]);
            }
        }
        grads
    }
}

/// A finite element function stored as nodal values over some [`FeSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    /// One value per dof of the owning space.
    pub values: Vec<f64>,
}

impl NodalField {
    /// The zero field.
    pub fn zeros(space: &FeSpace) -> Self {
        NodalField { values: vec![0.0; space.n_dofs()] }
    }

    /// Nodal interpolant of a function: evaluates `f` at every dof coordinate.
    pub fn interpolate(space: &FeSpace, f: impl Fn(f64, f64) -> f64) -> Self {
        NodalField {
            values: space.dof_coords.iter().map(|&[x, y]| f(x, y)).collect(),
        }
    }

    /// Wraps an existing value vector, checking its length.
    pub fn from_values(space: &FeSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_dofs() {
            return Err(Error::DimensionMismatch {
                detail: format!(
                    "field has {} values but the space has {} dofs",
                    values.len(),
                    space.n_dofs()
                ),
            });
        }
        Ok(NodalField { values })
    }

    /// Field value inside triangle `t` at barycentric coordinates `bary`.
    pub fn eval_local(&self, space: &FeSpace, t: usize, bary: [f64; 3]) -> f64 {
        let dofs = space.element_dofs(t);
        let vals = space.basis_values(bary);
        let mut out = 0.0;
        for k in 0..space.local_dofs() {
            out += self.values[dofs[k]] * vals[k];
        }
        out
    }

    /// Field gradient inside triangle `t` at barycentric coordinates `bary`.
    pub fn grad_local(&self, space: &FeSpace, t: usize, bary: [f64; 3]) -> [f64; 2] {
        let dofs = space.element_dofs(t);
        let bg = space.bary_gradients(t);
        let grads = space.basis_gradients(bary, &bg);
        let mut out = [0.0; 2];
        for k in 0..space.local_dofs() {
            out[0] += self.values[dofs[k]] * grads[k][0];
            out[1] += self.values[dofs[k]] * grads[k][1];
        }
        out
    }

    /// Field value at an arbitrary point of the closed unit square.
    pub fn eval_at(&self, space: &FeSpace, x: f64, y: f64) -> Result<f64> {
        let (t, bary) = space.mesh.locate_point(x, y)?;
        Ok(self.eval_local(space, t, bary))
    }

    /// Largest absolute nodal value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
