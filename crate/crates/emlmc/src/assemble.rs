//! Assembly of mass matrices, variable-coefficient stiffness matrices, and
//! load vectors.
//!
//! All element loops run in ascending triangle order and accumulate triplets
//! through a stable sort, so assembled values are bit-for-bit deterministic.
//! Mass and stiffness matrices over the same space share one sparsity
//! pattern, which makes linear combinations (the shared BDF2 system matrix)
//! and entrywise coefficient-splitting identities exact operations.

use crate::quadrature::QuadratureRule;
use crate::space::{FeSpace, MAX_LOCAL_DOFS};
use crate::linalg::{SpdOperator, TripletBuilder};

/// Basis values tabulated at the quadrature nodes (they do not depend on the
/// triangle, only on the barycentric coordinates).
fn tabulate_basis(space: &FeSpace, rule: &QuadratureRule) -> Vec<[f64; MAX_LOCAL_DOFS]> {
    rule.points.iter().map(|&b| space.basis_values(b)).collect()
}

/// Physical coordinates of a barycentric point in triangle `t`.
fn physical_point(coords: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0],
        bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1],
    ]
}

/// Assembles the mass matrix `M_ij = ∫ φ_i φ_j`.
pub fn assemble_mass(space: &FeSpace, rule: &QuadratureRule) -> SpdOperator {
    let nloc = space.local_dofs();
    let basis = tabulate_basis(space, rule);
    let mut builder = TripletBuilder::new(space.n_dofs(), space.n_dofs());
    let mut local = [[0.0; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    for t in 0..space.mesh.n_triangles() {
        let area = space.mesh.triangle_area(t);
        for row in local.iter_mut().take(nloc) {
            row[..nloc].fill(0.0);
        }
        for (q, vals) in basis.iter().enumerate() {
            let w = rule.weights[q] * area;
            for i in 0..nloc {
                let wi = w * vals[i];
                for j in 0..nloc {
                    local[i][j] += wi * vals[j];
                }
            }
        }
        let dofs = space.element_dofs(t);
        for i in 0..nloc {
            for j in 0..nloc {
                builder.add(dofs[i], dofs[j], local[i][j]);
            }
        }
    }
    builder.build_spd()
}

/// Assembles the stiffness matrix `A_ij = ∫ a(x) ∇φ_i · ∇φ_j` for a spatially
/// varying coefficient.
pub fn assemble_stiffness(
    space: &FeSpace,
    coefficient: impl Fn(f64, f64) -> f64,
    rule: &QuadratureRule,
) -> SpdOperator {
    let nloc = space.local_dofs();
    let mut builder = TripletBuilder::new(space.n_dofs(), space.n_dofs());
    let mut local = [[0.0; MAX_LOCAL_DOFS]; MAX_LOCAL_DOFS];
    for t in 0..space.mesh.n_triangles() {
        let area = space.mesh.triangle_area(t);
        let coords = space.mesh.triangle_coords(t);
        let bg = space.bary_gradients(t);
        for row in local.iter_mut().take(nloc) {
            row[..nloc].fill(0.0);
        }
        for (q, &bary) in rule.points.iter().enumerate() {
            let [x, y] = physical_point(&coords, bary);
            let w = rule.weights[q] * area * coefficient(x, y);
            let grads = space.basis_gradients(bary, &bg);
            for i in 0..nloc {
                for j in 0..nloc {
                    local[i][j] += w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
        let dofs = space.element_dofs(t);
        for i in 0..nloc {
            for j in 0..nloc {
                builder.add(dofs[i], dofs[j], local[i][j]);
            }
        }
    }
    builder.build_spd()
}

/// Precomputed geometry for assembling many load vectors over one space
/// (the time stepper assembles one load per member per step).
pub struct LoadAssembler {
    n_dofs: usize,
    nloc: usize,
    /// `area * w_q * N_k(bary_q)`, identical for all triangles of the
    /// structured mesh up to the per-triangle area factor (kept general).
    basis: Vec<[f64; MAX_LOCAL_DOFS]>,
    weights: Vec<f64>,
    /// Physical quadrature points, triangle-major.
    points: Vec<[f64; 2]>,
    areas: Vec<f64>,
    dofs: Vec<[usize; MAX_LOCAL_DOFS]>,
}

impl LoadAssembler {
    /// Tabulates quadrature geometry for `space` and `rule`.
    pub fn new(space: &FeSpace, rule: &QuadratureRule) -> Self {
        let n_tri = space.mesh.n_triangles();
        let basis = tabulate_basis(space, rule);
        let mut points = Vec::with_capacity(n_tri * rule.len());
        let mut areas = Vec::with_capacity(n_tri);
        let mut dofs = Vec::with_capacity(n_tri);
        for t in 0..n_tri {
            let coords = space.mesh.triangle_coords(t);
            for &bary in &rule.points {
                points.push(physical_point(&coords, bary));
            }
            areas.push(space.mesh.triangle_area(t));
            dofs.push(space.element_dofs(t));
        }
        LoadAssembler {
            n_dofs: space.n_dofs(),
            nloc: space.local_dofs(),
            basis,
            weights: rule.weights.clone(),
            points,
            areas,
            dofs,
        }
    }

    /// Assembles the load vector `b_i = ∫ f(x) φ_i` for one function.
    pub fn assemble(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        self.assemble_into(f, &mut out);
        out
    }

    /// `assemble` into a caller-owned buffer (overwritten).
    pub fn assemble_into(&self, f: impl Fn(f64, f64) -> f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_dofs);
        out.fill(0.0);
        let nq = self.weights.len();
        for (t, dofs) in self.dofs.iter().enumerate() {
            let area = self.areas[t];
            let pts = &self.points[t * nq..(t + 1) * nq];
            for (q, &[x, y]) in pts.iter().enumerate() {
                let w = self.weights[q] * area * f(x, y);
                let vals = &self.basis[q];
                for k in 0..self.nloc {
                    out[dofs[k]] += w * vals[k];
                }
            }
        }
    }

    /// Integrates `f²` over the domain on the cached quadrature geometry.
    pub fn integrate_squared(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let nq = self.weights.len();
        let mut total = 0.0;
        for (t, area) in self.areas.iter().enumerate() {
            let pts = &self.points[t * nq..(t + 1) * nq];
            for (q, &[x, y]) in pts.iter().enumerate() {
                let v = f(x, y);
                total += self.weights[q] * area * v * v;
            }
        }
        total
    }

    /// All physical quadrature points (used as coefficient probe points).
    pub fn quadrature_points(&self) -> &[[f64; 2]] {
        &self.points
    }
}

/// One-off load assembly.
pub fn assemble_load(
    space: &FeSpace,
    f: impl Fn(f64, f64) -> f64,
    rule: &QuadratureRule,
) -> Vec<f64> {
    LoadAssembler::new(space, rule).assemble(f)
}
