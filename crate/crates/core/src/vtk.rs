//! Legacy ASCII VTK output of a hex mesh with a displacement field.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{FieldState, HexMesh, Region};

/// Cell data code: -1 block b, -2 block a, 0 matrix, j inclusion j.
pub fn region_code(r: Region) -> i64 {
    match r {
        Region::BlockB => -1,
        Region::BlockA => -2,
        Region::Matrix => 0,
        Region::Inclusion(j) => j as i64,
    }
}

/// The corner ordering of the mesh is already the VTK hexahedron ordering.
pub fn to_vtk(mesh: &HexMesh, state: Option<&FieldState>, title: &str) -> String {
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let ne = mesh.elements.len();
    let _ = writeln!(s, "CELLS {} {}", ne, 9 * ne);
    for e in &mesh.elements {
        let ids: Vec<String> = e.nodes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(s, "8 {}", ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        s.push_str("12\n");
    }
    let _ = writeln!(s, "CELL_DATA {ne}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for e in &mesh.elements {
        let _ = writeln!(s, "{}", region_code(e.region));
    }
    if let Some(u) = state {
        let _ = writeln!(s, "POINT_DATA {}\nVECTORS displacement double", mesh.nodes.len());
        for c in u.values.chunks(3) {
            let _ = writeln!(s, "{:e} {:e} {:e}", c[0], c[1], c[2]);
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &HexMesh, state: Option<&FieldState>, title: &str) -> Result<()> {
    if let Some(u) = state {
        if u.values.len() != mesh.dof_count() {
            return Err(Error::Config(format!("state has {} values, mesh has {} dofs", u.values.len(), mesh.dof_count())));
        }
    }
    crate::harness::report::write_file(path, &to_vtk(mesh, state, title))
}
