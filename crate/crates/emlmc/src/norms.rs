//! Continuous and discrete norms used for error reporting and the stability
//! bookkeeping of the time stepper.
//!
//! Error integrals against a known solution run on the degree-8 quadrature
//! rule so the measurement is sharper than anything the degree-5 assembly
//! rule produced.

use crate::linalg::SpdOperator;
use crate::mesh::TriMesh;
use crate::quadrature::QuadratureRule;
use crate::space::{FeSpace, NodalField};

/// Integrates `g` over the mesh domain.
pub fn integrate(mesh: &TriMesh, g: impl Fn(f64, f64) -> f64, rule: &QuadratureRule) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        let coords = mesh.triangle_coords(t);
        let area = mesh.triangle_area(t);
        for (q, &bary) in rule.points.iter().enumerate() {
            let x = bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0];
            let y = bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1];
            total += rule.weights[q] * area * g(x, y);
        }
    }
    total
}

/// L² norm of a plain function over the domain.
pub fn l2_norm(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64, rule: &QuadratureRule) -> f64 {
    integrate(mesh, |x, y| f(x, y) * f(x, y), rule).max(0.0).sqrt()
}

/// L² norm of the difference between a finite element field and a function.
pub fn l2_error(
    space: &FeSpace,
    field: &NodalField,
    exact: impl Fn(f64, f64) -> f64,
    rule: &QuadratureRule,
) -> f64 {
    let mut total = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let coords = space.mesh.triangle_coords(t);
        let area = space.mesh.triangle_area(t);
        for (q, &bary) in rule.points.iter().enumerate() {
            let x = bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0];
            let y = bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1];
            let diff = field.eval_local(space, t, bary) - exact(x, y);
            total += rule.weights[q] * area * diff * diff;
        }
    }
    total.max(0.0).sqrt()
}

/// H¹ seminorm of the difference between a field and a known gradient.
pub fn h1_semi_error(
    space: &FeSpace,
    field: &NodalField,
    exact_grad: impl Fn(f64, f64) -> [f64; 2],
    rule: &QuadratureRule,
) -> f64 {
    let mut total = 0.0;
    for t in 0..space.mesh.n_triangles() {
        let coords = space.mesh.triangle_coords(t);
        let area = space.mesh.triangle_area(t);
        for (q, &bary) in rule.points.iter().enumerate() {
            let x = bary[0] * coords[0][0] + bary[1] * coords[1][0] + bary[2] * coords[2][0];
            let y = bary[0] * coords[0][1] + bary[1] * coords[1][1] + bary[2] * coords[2][1];
            let gh = field.grad_local(space, t, bary);
            let ge = exact_grad(x, y);
            let dx = gh[0] - ge[0];
            let dy = gh[1] - ge[1];
            total += rule.weights[q] * area * (dx * dx + dy * dy);
        }
    }
    total.max(0.0).sqrt()
}

/// Discrete L² norm `sqrt(vᵀ M v)` of nodal coefficients.
pub fn discrete_l2(mass: &SpdOperator, v: &[f64]) -> f64 {
    mass.quadratic_form(v).max(0.0).sqrt()
}

/// Discrete H¹ seminorm `sqrt(vᵀ A v)` with the unit-coefficient stiffness.
pub fn discrete_h1_semi(stiffness_unit: &SpdOperator, v: &[f64]) -> f64 {
    stiffness_unit.quadratic_form(v).max(0.0).sqrt()
}
