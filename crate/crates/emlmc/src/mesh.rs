//! Structured triangulations of the unit square and nested refinement hierarchies.
//!
//! A mesh with `n_side` cells per side carries `(n_side + 1)^2` grid vertices;
//! every square cell is split along its bottom-left to top-right diagonal into
//! two positively oriented triangles, so the mesh size (longest edge) is
//! `h = sqrt(2) / n_side`.  Refinement doubles `n_side`, which makes vertex
//! sets nested and halves `h` exactly (both are power-of-two rescalings).

use crate::error::Error;
use crate::Result;
use std::collections::HashMap;

/// Side of the unit square a boundary vertex or edge belongs to.
///
/// Corner vertices touch two sides; they are tagged with the priority
/// left, right, bottom, top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A conforming triangulation of `[0,1]^2` on a structured split-square grid.
#[derive(Debug, Clone)]
pub struct TriMesh {
    /// Cells per side of the underlying square grid.
    pub n_side: u32,
    /// Refinement level within the hierarchy that built this mesh (0 = coarsest).
    pub level: usize,
    /// Mesh size: length of the diagonal edges, `sqrt(2) / n_side`.
    pub h: f64,
    /// Vertex coordinates, grid point `(i, j)` at index `j * (n_side+1) + i`.
    pub vertices: Vec<[f64; 2]>,
    /// Vertex index triples, positively oriented (counter-clockwise).
    pub triangles: Vec<[usize; 3]>,
    /// Unique edges as vertex index pairs `(lo, hi)`, in first-seen order.
    pub edges: Vec<[usize; 2]>,
    /// For each triangle, global indices of its local edges `(0,1), (1,2), (2,0)`.
    pub triangle_edges: Vec<[usize; 3]>,
    /// Boundary side of each vertex (`None` for interior vertices).
    pub vertex_side: Vec<Option<Side>>,
    /// Boundary side of each edge (`None` for interior edges).
    pub edge_side: Vec<Option<Side>>,
}

impl TriMesh {
    /// Builds the structured mesh with `n_side >= 1` cells per side.
    pub fn structured(n_side: u32, level: usize) -> Result<Self> {
        if n_side == 0 {
            return Err(Error::InvalidArgument(
                "mesh needs at least one cell per side".into(),
            ));
        }
        let n = n_side as usize;
        let np = n + 1;
        let vid = |i: usize, j: usize| j * np + i;

        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 / n_side as f64, j as f64 / n_side as f64]);
            }
        }

        // Two triangles per cell, split along the (i,j) -> (i+1,j+1) diagonal,
        // both counter-clockwise.
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = vid(i, j);
                let v10 = vid(i + 1, j);
                let v01 = vid(i, j + 1);
                let v11 = vid(i + 1, j + 1);
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        // Enumerate unique edges in first-seen order while recording the
        // triangle-to-edge map used by quadratic spaces.
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tris: Vec<u8> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut locals = [0usize; 3];
            for (slot, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                let (lo, hi) = ordered(tri[a], tri[b]);
                let idx = *edge_index.entry((lo, hi)).or_insert_with(|| {
                    edges.push([lo, hi]);
                    edge_tris.push(0);
                    edges.len() - 1
                });
                edge_tris[idx] += 1;
                locals[slot] = idx;
            }
            triangle_edges.push(locals);
        }

        let vertex_side = vertices.iter().map(|&[x, y]| side_of(x, y)).collect();
        let edge_side = edges
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                if edge_tris[e] == 1 {
                    let [xa, ya] = vertices[a];
                    let [xb, yb] = vertices[b];
                    side_of_edge(xa, ya, xb, yb)
                } else {
                    None
                }
            })
            .collect();

        Ok(TriMesh {
            n_side,
            level,
            h: 2.0_f64.sqrt() / n_side as f64,
            vertices,
            triangles,
            edges,
            triangle_edges,
            vertex_side,
            edge_side,
        })
    }

    /// Number of vertices.
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Number of triangles.
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of unique edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Area of a triangle (all cells are congruent: `1 / (2 n_side^2)`).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let [xa, ya] = self.vertices[a];
        let [xb, yb] = self.vertices[b];
        let [xc, yc] = self.vertices[c];
        0.5 * ((xb - xa) * (yc - ya) - (xc - xa) * (yb - ya))
    }

    /// Vertex coordinates of triangle `t`.
    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Locates a point in the closed unit square, returning the index of a
    /// containing triangle and the barycentric coordinates of the point there.
    ///
    /// Points on shared edges are assigned deterministically (lower triangle
    /// of a cell when on the diagonal).
    pub fn locate_point(&self, x: f64, y: f64) -> Result<(usize, [f64; 3])> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::PointOutsideDomain { x, y });
        }
        let n = self.n_side as f64;
        let gx = x * n;
        let gy = y * n;
        let i = (gx.floor() as i64).clamp(0, self.n_side as i64 - 1) as usize;
        let j = (gy.floor() as i64).clamp(0, self.n_side as i64 - 1) as usize;
        let xi = gx - i as f64;
        let eta = gy - j as f64;
        // Triangles of cell (i, j) sit at 2*(j*n + i) (lower: xi >= eta) and +1.
        let cell = 2 * (j * self.n_side as usize + i);
        let t = if xi >= eta { cell } else { cell + 1 };
        let bary = if xi >= eta {
            // Lower triangle (v00, v10, v11): xi = l1 + l2, eta = l2.
            [1.0 - xi, xi - eta, eta]
        } else {
            // Upper triangle (v00, v11, v01): xi = l1, eta = l1 + l2.
            [1.0 - eta, xi, eta - xi]
        };
        Ok((t, bary))
    }

    /// Midpoint of edge `e`.
    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let [xa, ya] = self.vertices[a];
        let [xb, yb] = self.vertices[b];
        [0.5 * (xa + xb), 0.5 * (ya + yb)]
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Boundary side of a vertex, with corner priority left, right, bottom, top.
fn side_of(x: f64, y: f64) -> Option<Side> {
    if x == 0.0 {
        Some(Side::Left)
    } else if x == 1.0 {
        Some(Side::Right)
    } else if y == 0.0 {
        Some(Side::Bottom)
    } else if y == 1.0 {
        Some(Side::Top)
    } else {
        None
    }
}

/// Boundary side of an edge given both endpoint coordinates.
fn side_of_edge(xa: f64, ya: f64, xb: f64, yb: f64) -> Option<Side> {
    if xa == 0.0 && xb == 0.0 {
        Some(Side::Left)
    } else if xa == 1.0 && xb == 1.0 {
        Some(Side::Right)
    } else if ya == 0.0 && yb == 0.0 {
        Some(Side::Bottom)
    } else if ya == 1.0 && yb == 1.0 {
        Some(Side::Top)
    } else {
        None
    }
}

/// Builds the nested hierarchy of `levels + 1` meshes with coarse size `h0`.
///
/// `h0` must equal `sqrt(2) / n` for a positive integer `n`; each level
/// doubles `n_side`, halving `h` exactly.
pub fn build_hierarchy(h0: f64, levels: usize) -> Result<Vec<TriMesh>> {
    let n0 = admissible_n(h0)?;
    let mut meshes = Vec::with_capacity(levels + 1);
    for l in 0..=levels {
        let n = n0
            .checked_mul(1u32 << l)
            .ok_or_else(|| Error::InvalidArgument(format!("refinement level {l} overflows the grid size")))?;
        meshes.push(TriMesh::structured(n, l)?);
    }
    Ok(meshes)
}

/// Checks that `h0 = sqrt(2)/n` for an integer `n >= 1` and returns that `n`.
fn admissible_n(h0: f64) -> Result<u32> {
    let sqrt2 = 2.0_f64.sqrt();
    if !(h0.is_finite() && h0 > 0.0 && h0 <= sqrt2) {
        return Err(Error::MeshSizeNotAdmissible {
            h0,
            nearest: 1,
            admissible: sqrt2,
        });
    }
    let n_real = sqrt2 / h0;
    let nearest = n_real.round().max(1.0) as u32;
    let admissible = sqrt2 / nearest as f64;
    // Accept tiny representation noise in a config file, nothing more.
    if (n_real - nearest as f64).abs() > 1e-9 * n_real {
        return Err(Error::MeshSizeNotAdmissible { h0, nearest, admissible });
    }
    Ok(nearest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_by_four_counts_match_direct_enumeration() {
        let mesh = TriMesh::structured(4, 0).unwrap();
        assert_eq!(mesh.n_vertices(), 25);
        assert_eq!(mesh.n_triangles(), 32);
        assert_eq!(mesh.n_edges(), 56);
        // Euler characteristic with the outer face: V - E + F = 2.
        let v = mesh.n_vertices() as i64;
        let e = mesh.n_edges() as i64;
        let f = mesh.n_triangles() as i64 + 1;
        assert_eq!(v - e + f, 2);
    }

    #[test]
    fn counts_follow_closed_forms_for_several_sizes() {
        for n in [1u32, 2, 3, 5, 8] {
            let mesh = TriMesh::structured(n, 0).unwrap();
            let n = n as usize;
            assert_eq!(mesh.n_vertices(), (n + 1) * (n + 1));
            assert_eq!(mesh.n_triangles(), 2 * n * n);
            assert_eq!(mesh.n_edges(), 3 * n * n + 2 * n);
            let v = mesh.n_vertices() as i64;
            let e = mesh.n_edges() as i64;
            let f = mesh.n_triangles() as i64 + 1;
            assert_eq!(v - e + f, 2);
        }
    }

    #[test]
    fn triangles_positively_oriented_and_areas_sum_to_one() {
        for n in [1u32, 3, 4, 8] {
            let mesh = TriMesh::structured(n, 0).unwrap();
            let mut total = 0.0;
            for t in 0..mesh.n_triangles() {
                let area = mesh.triangle_area(t);
                assert!(area > 0.0, "triangle {t} has non-positive area");
                total += area;
            }
            assert!((total - 1.0).abs() <= 1e-12, "area sum {total}");
        }
    }

    #[test]
    fn hierarchy_halves_h_exactly_and_doubles_n() {
        let h0 = 2.0_f64.sqrt() / 4.0;
        let meshes = build_hierarchy(h0, 2).unwrap();
        assert_eq!(meshes.len(), 3);
        assert_eq!(
            meshes.iter().map(|m| m.n_side).collect::<Vec<_>>(),
            vec![4, 8, 16]
        );
        for (l, mesh) in meshes.iter().enumerate() {
            assert_eq!(mesh.level, l);
            // Power-of-two rescaling must be bit-exact.
            assert_eq!(mesh.h, h0 * 0.5_f64.powi(l as i32));
        }
    }

    #[test]
    fn zero_level_hierarchy_is_single_mesh() {
        let meshes = build_hierarchy(2.0_f64.sqrt() / 4.0, 0).unwrap();
        assert_eq!(meshes.len(), 1);
        assert_eq!(meshes[0].n_side, 4);
    }

    #[test]
    fn inadmissible_h0_is_rejected_with_nearest_n() {
        let err = build_hierarchy(0.31, 1).unwrap_err();
        match err {
            Error::MeshSizeNotAdmissible { nearest, .. } => assert_eq!(nearest, 5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn refined_vertices_contain_coarse_vertices() {
        let meshes = build_hierarchy(2.0_f64.sqrt() / 3.0, 1).unwrap();
        let (coarse, fine) = (&meshes[0], &meshes[1]);
        for &[x, y] in &coarse.vertices {
            assert!(
                fine.vertices.iter().any(|&[fx, fy]| fx == x && fy == y),
                "coarse vertex ({x}, {y}) missing from refinement"
            );
        }
    }

    /// Brute-force location oracle: scan all triangles, solve the affine
    /// barycentric system densely, accept when all coordinates are in [0, 1].
    fn locate_brute_force(mesh: &TriMesh, x: f64, y: f64) -> (usize, [f64; 3]) {
        for t in 0..mesh.n_triangles() {
            let [pa, pb, pc] = mesh.triangle_coords(t);
            let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            let l1 = ((x - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (y - pa[1])) / det;
            let l2 = ((pb[0] - pa[0]) * (y - pa[1]) - (x - pa[0]) * (pb[1] - pa[1])) / det;
            let l0 = 1.0 - l1 - l2;
            let eps = 1e-12;
            if l0 >= -eps && l1 >= -eps && l2 >= -eps {
                return (t, [l0, l1, l2]);
            }
        }
        panic!("point ({x}, {y}) not found by brute force");
    }

    #[test]
    fn locate_interior_point_matches_brute_force() {
        let mesh = TriMesh::structured(4, 0).unwrap();
        let (t, bary) = mesh.locate_point(0.3, 0.7).unwrap();
        let (t_ref, bary_ref) = locate_brute_force(&mesh, 0.3, 0.7);
        assert_eq!(t, t_ref);
        for k in 0..3 {
            assert!((bary[k] - bary_ref[k]).abs() <= 1e-12);
        }
        // Reconstruct the point from the barycentric coordinates.
        let [pa, pb, pc] = mesh.triangle_coords(t);
        let rx = bary[0] * pa[0] + bary[1] * pb[0] + bary[2] * pc[0];
        let ry = bary[0] * pa[1] + bary[1] * pb[1] + bary[2] * pc[1];
        assert!((rx - 0.3).abs() <= 1e-12 && (ry - 0.7).abs() <= 1e-12);
    }

    #[test]
    fn locate_every_vertex_returns_unit_barycentric() {
        for n in [3u32, 4] {
            let mesh = TriMesh::structured(n, 0).unwrap();
            for (v, &[x, y]) in mesh.vertices.iter().enumerate() {
                let (t, bary) = mesh.locate_point(x, y).unwrap();
                let tri = mesh.triangles[t];
                let local = tri.iter().position(|&w| w == v).unwrap_or_else(|| {
                    panic!("vertex {v} not in located triangle {t}")
                });
                assert!((bary[local] - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn locate_centroids_and_edge_points_reconstruct() {
        let mesh = TriMesh::structured(4, 0).unwrap();
        for t in 0..mesh.n_triangles() {
            let [pa, pb, pc] = mesh.triangle_coords(t);
            let cx = (pa[0] + pb[0] + pc[0]) / 3.0;
            let cy = (pa[1] + pb[1] + pc[1]) / 3.0;
            let (tc, bary) = mesh.locate_point(cx, cy).unwrap();
            assert_eq!(tc, t, "centroid of triangle {t} located elsewhere");
            for b in bary {
                assert!((b - 1.0 / 3.0).abs() <= 1e-12);
            }
        }
        // A point on a cell diagonal belongs to the lower triangle by convention.
        let (t, _) = mesh.locate_point(0.125, 0.125).unwrap();
        assert_eq!(t % 2, 0);
    }

    #[test]
    fn locate_rejects_outside_points() {
        let mesh = TriMesh::structured(4, 0).unwrap();
        assert!(mesh.locate_point(-0.01, 0.5).is_err());
        assert!(mesh.locate_point(0.5, 1.01).is_err());
        assert!(mesh.locate_point(1.0, 1.0).is_ok());
    }

    #[test]
    fn boundary_tags_cover_all_four_sides() {
        let mesh = TriMesh::structured(4, 0).unwrap();
        let count = |side: Side| {
            mesh.vertex_side
                .iter()
                .filter(|s| **s == Some(side))
                .count()
        };
        // Corner priority: left and right each claim both their corners.
        assert_eq!(count(Side::Left), 5);
        assert_eq!(count(Side::Right), 5);
        assert_eq!(count(Side::Bottom), 3);
        assert_eq!(count(Side::Top), 3);
        let boundary_edges = mesh.edge_side.iter().filter(|s| s.is_some()).count();
        assert_eq!(boundary_edges, 16);
    }
}
