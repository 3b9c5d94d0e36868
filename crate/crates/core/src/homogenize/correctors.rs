//! Cell correctors chi^i and the effective interface matrix H.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_stiffness, Materials};
use crate::dofs::{DofMap, DofMapBuilder};
use crate::error::{Error, Result};
use crate::linsolve::Cholesky;
use crate::mesh::{FieldState, HexMesh};
use crate::sparse::{norm2, CsrMatrix};

/// chi^i equals e_i on the top face, 0 on the bottom face, and is laterally periodic.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    /// Mesh of the cell part carrying the correctors.
    pub mesh: HexMesh,
    pub chi: [FieldState; 3],
    /// Relative Galerkin residuals of the three solves.
    pub residuals: [f64; 3],
}

/// H_ij = int a e(chi^i) : e(chi^j) over the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveInterface {
    pub h: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
}

impl EffectiveInterface {
    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues[0] > 0.0
    }
}

/// Fails when a connected piece of the cell touches neither the top nor the bottom face.
fn check_anchored(mesh: &HexMesh) -> Result<()> {
    let n = mesh.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    let union = |p: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(p, a), find(p, b));
        if ra != rb {
            p[ra.max(rb)] = ra.min(rb);
        }
    };
    for el in &mesh.elements {
        for &m in &el.nodes[1..] {
            union(&mut parent, el.nodes[0], m);
        }
    }
    for &(s, m) in &mesh.periodic {
        union(&mut parent, s, m);
    }
    let mut anchored = vec![false; n];
    for &m in mesh.boundary.sigma.iter().chain(&mesh.boundary.s_a) {
        let r = find(&mut parent, m);
        anchored[r] = true;
    }
    for el in &mesh.elements {
        let r = find(&mut parent, el.nodes[0]);
        if !anchored[r] {
            return Err(Error::Singular("a piece of the cell matrix is cut off from the top and bottom faces".into()));
        }
    }
    Ok(())
}

fn corrector_dofs(mesh: &HexMesh, i: usize) -> Result<DofMap> {
    let mut b = DofMapBuilder::new(mesh.dof_count());
    for (n, used) in mesh.used_nodes().into_iter().enumerate() {
        if !used {
            b.fix_node(n, [0.0; 3]);
        }
    }
    for &(s, m) in &mesh.periodic {
        b.tie_nodes(s, m);
    }
    let mut top = [0.0; 3];
    top[i] = 1.0;
    for &n in &mesh.boundary.sigma {
        b.fix_node(n, [0.0; 3]);
    }
    for &n in &mesh.boundary.s_a {
        b.fix_node(n, top);
    }
    b.build()
}

/// Solves the three cell problems on `cell_mesh` (a cell mesh from
/// [`crate::mesh::mesh_cell`], with inclusions removed for the perforated cell).
pub fn solve_correctors(cell_mesh: &HexMesh, materials: &Materials) -> Result<CorrectorSet> {
    if cell_mesh.boundary.sigma.is_empty() || cell_mesh.boundary.s_a.is_empty() {
        return Err(Error::InvalidCell("cell mesh has no top or bottom face".into()));
    }
    check_anchored(cell_mesh)?;
    let k = assemble_stiffness(cell_mesh, materials, 1.0)?;
    let maps: Vec<DofMap> = (0..3).map(|i| corrector_dofs(cell_mesh, i)).collect::<Result<_>>()?;
    let kr = maps[0].reduce_matrix(&k);
    // one element across: every node sits on the top or bottom face
    let chol = if kr.nrows == 0 { None } else { Some(Cholesky::factor(&kr).map_err(|e| Error::Singular(format!("cell problem: {e}")))?) };
    let solved: Vec<(FieldState, f64)> = maps
        .par_iter()
        .map(|m| {
            let rhs = m.reduce_rhs(&k, &vec![0.0; k.nrows]);
            let x = chol.as_ref().map_or_else(Vec::new, |c| c.solve(&rhs));
            let res = galerkin_residual(&kr, &x, &rhs);
            (FieldState { values: m.expand(&x) }, res)
        })
        .collect();
    let mut it = solved.into_iter();
    let (c0, r0) = it.next().unwrap();
    let (c1, r1) = it.next().unwrap();
    let (c2, r2) = it.next().unwrap();
    Ok(CorrectorSet { mesh: cell_mesh.clone(), chi: [c0, c1, c2], residuals: [r0, r1, r2] })
}

pub(crate) fn galerkin_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let scale = norm2(b).max(norm2(&ax));
    if scale == 0.0 {
        0.0
    } else {
        norm2(&r) / scale
    }
}

pub fn effective_h(set: &CorrectorSet, materials: &Materials) -> Result<EffectiveInterface> {
    let k = assemble_stiffness(&set.mesh, materials, 1.0)?;
    let kchi: Vec<Vec<f64>> = set.chi.iter().map(|c| k.mul_vec(&c.values)).collect();
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = crate::sparse::dot(&set.chi[i].values, &kchi[j]);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    let m = Matrix3::from_fn(|i, j| h[i][j]);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(EffectiveInterface { h, eigenvalues: [ev[0], ev[1], ev[2]] })
}

/// u^0(y) = sum_i chi^i(y) u^a_i + sum_i (e_i - chi^i(y)) u^b_i at every omega node.
pub fn reconstruct_layer(set: &CorrectorSet, trace_a: &[[f64; 3]], trace_b: &[[f64; 3]]) -> Result<Vec<FieldState>> {
    if trace_a.len() != trace_b.len() {
        return Err(Error::InvalidDomain("traces on the two sides have different lengths".into()));
    }
    Ok(trace_a
        .par_iter()
        .zip(trace_b.par_iter())
        .map(|(ua, ub)| {
            let delta = [ua[0] - ub[0], ua[1] - ub[1], ua[2] - ub[2]];
            let mut values = Vec::with_capacity(set.mesh.dof_count());
            for n in 0..set.mesh.node_count() {
                let mut v = *ub;
                for (i, chi) in set.chi.iter().enumerate() {
                    let c = chi.node(n);
                    for k in 0..3 {
                        v[k] += c[k] * delta[i];
                    }
                }
                values.extend_from_slice(&v);
            }
            FieldState { values }
        })
        .collect())
}
