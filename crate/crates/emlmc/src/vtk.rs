//! Legacy ASCII VTK export of nodal fields (triangles, vertex values only).

use std::io::Write;
use std::path::Path;

use crate::report::float_cell;
use crate::space::{FeSpace, NodalField};
use crate::{Error, Result};

/// Writes an unstructured-grid VTK file with one scalar point field.
///
/// Quadratic spaces are exported through their vertex values; edge dofs are
/// dropped (dof order puts all vertices first).
pub fn write_vtk(path: &Path, space: &FeSpace, field: &NodalField, name: &str) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io { path: path.display().to_string(), source };
    if field.values.len() != space.n_dofs() {
        return Err(Error::DimensionMismatch {
            detail: format!(
                "field has {} values but the space has {} dofs",
                field.values.len(),
                space.n_dofs()
            ),
        });
    }
    let mesh = &space.mesh;
    let n_vertices = mesh.vertices.len();
    let n_triangles = mesh.triangles.len();
    let mut out = Vec::new();
    writeln!(out, "# vtk DataFile Version 3.0").map_err(io_err)?;
    writeln!(out, "{name}").map_err(io_err)?;
    writeln!(out, "ASCII").map_err(io_err)?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID").map_err(io_err)?;
    writeln!(out, "POINTS {n_vertices} double").map_err(io_err)?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} 0.0", float_cell(v[0]), float_cell(v[1])).map_err(io_err)?;
    }
    writeln!(out, "CELLS {n_triangles} {}", 4 * n_triangles).map_err(io_err)?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).map_err(io_err)?;
    }
    writeln!(out, "CELL_TYPES {n_triangles}").map_err(io_err)?;
    for _ in 0..n_triangles {
        writeln!(out, "5").map_err(io_err)?;
    }
    writeln!(out, "POINT_DATA {n_vertices}").map_err(io_err)?;
    writeln!(out, "SCALARS {name} double 1").map_err(io_err)?;
    writeln!(out, "LOOKUP_TABLE default").map_err(io_err)?;
    for v in &field.values[..n_vertices] {
        writeln!(out, "{}", float_cell(*v)).map_err(io_err)?;
    }
    std::fs::write(path, out).map_err(io_err)
}
