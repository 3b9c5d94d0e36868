//! L2 projection of inclusion displacements onto rigid motions, cell by cell.
//!
//! The rigid basis is {e_i, e_i ^ (y - O^j)} in cell coordinates y, so the
//! Gram matrix does not degrade as eps shrinks.

use nalgebra::{Matrix6, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{gauss_points, map_point, shape_values};
use crate::geometry::CellGeometry;
use crate::mesh::{FieldState, HexMesh, Region};

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// a + b ^ (y - o).
pub fn rigid_eval(a: [f64; 3], b: [f64; 3], o: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    let w = cross(b, [y[0] - o[0], y[1] - o[1], y[2] - o[2]]);
    [a[0] + w[0], a[1] + w[1], a[2] + w[2]]
}

fn basis(k: usize, o: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[k % 3] = 1.0;
    if k < 3 {
        e
    } else {
        cross(e, [y[0] - o[0], y[1] - o[1], y[2] - o[2]])
    }
}

/// Elements of inclusion j in one layer cell with the cell's anchor and scale.
#[derive(Debug, Clone)]
pub struct InclusionPatch {
    pub cell: usize,
    pub inclusion: usize,
    pub anchor: [f64; 2],
    pub eps: f64,
    pub elements: Vec<usize>,
}

/// Every (cell, inclusion) patch of a layer mesh; a cell mesh counts as one
/// cell with eps = 1.
pub fn inclusion_patches(mesh: &HexMesh) -> Vec<InclusionPatch> {
    let families = mesh.elements.iter().filter_map(|e| if let Region::Inclusion(j) = e.region { Some(j) } else { None }).max().unwrap_or(0);
    let cells: Vec<([f64; 2], f64, Vec<usize>)> = match &mesh.layout {
        Some(lay) => {
            lay.xi.iter().zip(&lay.cell_elements).map(|(xi, els)| ([lay.eps * xi[0] as f64, lay.eps * xi[1] as f64], lay.eps, els.clone())).collect()
        }
        None => vec![([0.0, 0.0], 1.0, (0..mesh.elements.len()).collect())],
    };
    let mut out = Vec::new();
    for (c, (anchor, eps, els)) in cells.into_iter().enumerate() {
        for j in 1..=families {
            let elements: Vec<usize> = els.iter().copied().filter(|&e| mesh.elements[e].region == Region::Inclusion(j)).collect();
            if !elements.is_empty() {
                out.push(InclusionPatch { cell: c, inclusion: j, anchor, eps, elements });
            }
        }
    }
    out
}

impl InclusionPatch {
    fn cell_coord(&self, x: [f64; 3]) -> [f64; 3] {
        [(x[0] - self.anchor[0]) / self.eps, (x[1] - self.anchor[1]) / self.eps, x[2] / self.eps]
    }

    /// Nodes used by the patch, sorted.
    pub fn nodes(&self, mesh: &HexMesh) -> Vec<usize> {
        let mut n: Vec<usize> = self.elements.iter().flat_map(|&e| mesh.elements[e].nodes).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// Visits every Gauss point with (physical weight, cell coordinate, interpolated value).
    fn for_each_point(&self, mesh: &HexMesh, state: &FieldState, mut f: impl FnMut(f64, [f64; 3], [f64; 3])) {
        for &e in &self.elements {
            let (lo, hi) = mesh.element_box(e);
            let h = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
            let det = h[0] * h[1] * h[2] / 8.0 * mesh.elements[e].weight;
            let nodes = mesh.elements[e].nodes;
            for r in gauss_points() {
                let n = shape_values(r);
                let mut u = [0.0; 3];
                for a in 0..8 {
                    let v = state.node(nodes[a]);
                    for c in 0..3 {
                        u[c] += n[a] * v[c];
                    }
                }
                f(det, self.cell_coord(map_point(lo, h, r)), u);
            }
        }
    }
}

/// Result of projecting one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidProjection {
    pub a: [f64; 3],
    pub b: [f64; 3],
    /// int (u - r) . r_k for the six basis motions.
    pub orthogonality: [f64; 6],
    /// ||u - r||_{L2} over the patch.
    pub residual_l2: f64,
    /// ||u||_{L2} over the patch.
    pub state_l2: f64,
}

/// Projection of the state on rigid motions of one patch, center `o` in cell coordinates.
pub fn project_patch(mesh: &HexMesh, state: &FieldState, patch: &InclusionPatch, o: [f64; 3]) -> Result<RigidProjection> {
    let mut gram = Matrix6::<f64>::zeros();
    let mut rhs = Vector6::<f64>::zeros();
    patch.for_each_point(mesh, state, |w, y, u| {
        let phi: [[f64; 3]; 6] = std::array::from_fn(|k| basis(k, o, y));
        for k in 0..6 {
            rhs[k] += w * (phi[k][0] * u[0] + phi[k][1] * u[1] + phi[k][2] * u[2]);
            for l in 0..6 {
                gram[(k, l)] += w * (phi[k][0] * phi[l][0] + phi[k][1] * phi[l][1] + phi[k][2] * phi[l][2]);
            }
        }
    });
    let chol = gram.cholesky().ok_or_else(|| Error::Singular("degenerate rigid Gram matrix".into()))?;
    let c = chol.solve(&rhs);
    let a = [c[0], c[1], c[2]];
    let b = [c[3], c[4], c[5]];
    let mut orth = [0.0; 6];
    let (mut res2, mut u2) = (0.0, 0.0);
    patch.for_each_point(mesh, state, |w, y, u| {
        let r = rigid_eval(a, b, o, y);
        let d = [u[0] - r[0], u[1] - r[1], u[2] - r[2]];
        for (k, o_k) in orth.iter_mut().enumerate() {
            let p = basis(k, o, y);
            *o_k += w * (d[0] * p[0] + d[1] * p[1] + d[2] * p[2]);
        }
        res2 += w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        u2 += w * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    });
    Ok(RigidProjection { a, b, orthogonality: orth, residual_l2: res2.sqrt(), state_l2: u2.sqrt() })
}

/// Projection of inclusion `j` in cell `c`, and the residual u - r written into
/// a copy of the state on the patch nodes (other entries unchanged).
pub fn project_rigid(mesh: &HexMesh, cell: &CellGeometry, state: &FieldState, j: usize, c: usize) -> Result<(RigidProjection, FieldState)> {
    let patch = inclusion_patches(mesh)
        .into_iter()
        .find(|p| p.inclusion == j && p.cell == c)
        .ok_or_else(|| Error::InvalidCell(format!("no inclusion {j} in cell {c}")))?;
    let o = *cell.centers.get(j - 1).ok_or_else(|| Error::InvalidCell(format!("unknown inclusion {j}")))?;
    let proj = project_patch(mesh, state, &patch, o)?;
    let mut residual = state.clone();
    for n in patch.nodes(mesh) {
        let y = patch.cell_coord(mesh.nodes[n]);
        let r = rigid_eval(proj.a, proj.b, o, y);
        let u = state.node(n);
        residual.set_node(n, [u[0] - r[0], u[1] - r[1], u[2] - r[2]]);
    }
    Ok((proj, residual))
}

/// Piecewise constant rigid fields a^j, b^j over the cells and their norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidField {
    /// entries[j - 1][c] = (a, b) of inclusion j in cell c.
    pub entries: Vec<Vec<([f64; 3], [f64; 3])>>,
    /// sum over j of ||a^j||_{L1(omega)} + eps ||b^j||_{L1(omega)}.
    pub l1_norm: f64,
    /// sum over patches of ||u^j - r^j||^2_{L2}.
    pub residual_sq: f64,
    /// sum over j of ||u^j||_{L1} over the inclusions.
    pub state_l1: f64,
    pub max_orthogonality: f64,
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn rigid_fields(mesh: &HexMesh, cell: &CellGeometry, state: &FieldState) -> Result<RigidField> {
    let patches = inclusion_patches(mesh);
    let projections: Vec<Result<RigidProjection>> =
        patches.par_iter().map(|p| project_patch(mesh, state, p, cell.centers[p.inclusion - 1])).collect();
    let cells = mesh.layout.as_ref().map_or(1, |l| l.xi.len());
    let mut entries = vec![vec![([0.0; 3], [0.0; 3]); cells]; cell.inclusions.len()];
    let (mut l1, mut res, mut ul1, mut orth) = (0.0, 0.0, 0.0, 0.0f64);
    for (p, proj) in patches.iter().zip(projections) {
        let proj = proj?;
        entries[p.inclusion - 1][p.cell] = (proj.a, proj.b);
        let area = p.eps * p.eps;
        l1 += area * (norm3(proj.a) + p.eps * norm3(proj.b));
        res += proj.residual_l2 * proj.residual_l2;
        p.for_each_point(mesh, state, |w, _, u| ul1 += w * norm3(u));
        orth = orth.max(proj.orthogonality.iter().fold(0.0f64, |m, v| m.max(v.abs())) / proj.state_l2.max(f64::MIN_POSITIVE));
    }
    Ok(RigidField { entries, l1_norm: l1, residual_sq: res, state_l1: ul1, max_orthogonality: orth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_unit_cell, tile_layer, CellSpec};
    use crate::mesh::mesh_assembly;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(eps: f64) -> (CellGeometry, HexMesh) {
        let g = build_unit_cell(&CellSpec { inclusions: vec![[0.25, 0.25, 0.25, 0.75, 0.5, 0.75]], open_cracks: vec![] }).unwrap();
        let d = tile_layer(&g, [1.0, 1.0], 1.0, eps).unwrap();
        let m = mesh_assembly(&d, &g, 4, 1, 1.0).unwrap();
        (g, m)
    }

    #[test]
    fn rigid_input_is_recovered() {
        let (g, m) = setup(0.5);
        let (a, b) = ([0.3, -1.0, 2.0], [0.5, 0.25, -1.5]);
        let o = g.centers[0];
        let lay = m.layout.clone().unwrap();
        let mut s = FieldState::zeros(&m);
        for (c, xi) in lay.xi.iter().enumerate() {
            for &n in &lay.cell_nodes[c] {
                let x = m.nodes[n];
                let y = [x[0] / 0.5 - xi[0] as f64, x[1] / 0.5 - xi[1] as f64, x[2] / 0.5];
                s.set_node(n, rigid_eval(a, b, o, y));
            }
        }
        for c in 0..lay.xi.len() {
            let (p, res) = project_rigid(&m, &g, &s, 1, c).unwrap();
            for k in 0..3 {
                assert!((p.a[k] - a[k]).abs() < 1e-13 && (p.b[k] - b[k]).abs() < 1e-13);
            }
            assert!(p.residual_l2 < 1e-13);
            let patch = inclusion_patches(&m).into_iter().find(|p| p.cell == c).unwrap();
            for n in patch.nodes(&m) {
                assert!(res.node(n).iter().all(|v| v.abs() < 1e-13));
            }
        }
        let z = project_rigid(&m, &g, &FieldState::zeros(&m), 1, 0).unwrap().0;
        assert_eq!((z.a, z.b), ([0.0; 3], [0.0; 3]));
    }

    #[test]
    fn translation_and_local_rotation() {
        let (g, m) = setup(0.25);
        let t = FieldState::from_fn(&m, |_, _| [1.0, 2.0, 3.0]);
        let f = rigid_fields(&m, &g, &t).unwrap();
        for (a, b) in &f.entries[0] {
            for k in 0..3 {
                assert!((a[k] - [1.0, 2.0, 3.0][k]).abs() < 1e-13 && b[k].abs() < 1e-13);
            }
        }
        // rotation about O^1 inside cell 5 only
        let lay = m.layout.clone().unwrap();
        let (c0, xi) = (5, lay.xi[5]);
        let patch = inclusion_patches(&m).into_iter().find(|p| p.cell == c0).unwrap();
        let mut s = FieldState::zeros(&m);
        let w = [0.0, 0.0, 1.0];
        for n in patch.nodes(&m) {
            let x = m.nodes[n];
            let y = [x[0] / 0.25 - xi[0] as f64, x[1] / 0.25 - xi[1] as f64, x[2] / 0.25];
            s.set_node(n, rigid_eval([0.0; 3], w, g.centers[0], y));
        }
        let f = rigid_fields(&m, &g, &s).unwrap();
        for (c, (a, b)) in f.entries[0].iter().enumerate() {
            let want = if c == c0 { w } else { [0.0; 3] };
            for k in 0..3 {
                assert!(a[k].abs() < 1e-13 && (b[k] - want[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn random_fields_orthogonality_and_idempotence() {
        let (g, m) = setup(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let s = FieldState { values: (0..m.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect() };
            let (p, res) = project_rigid(&m, &g, &s, 1, 2).unwrap();
            let max_o = p.orthogonality.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max_o <= 1e-12 * p.state_l2);
            let (q, _) = project_rigid(&m, &g, &res, 1, 2).unwrap();
            assert!(q.a.iter().chain(&q.b).all(|v| v.abs() <= 1e-12));
        }
        assert!(project_rigid(&m, &g, &FieldState::zeros(&m), 2, 0).is_err());
    }
}
