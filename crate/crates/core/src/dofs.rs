//! Reduction of full dof vectors to free unknowns.
//!
//! Each full dof is either fixed to a value or mapped to a free unknown.
//! Several dofs may share one unknown (periodicity, interface matching), so
//! the prolongation P has 0/1 entries and u = P u_r + u_D.

use crate::error::{Error, Result};
use crate::mesh::HexMesh;
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofSlot {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub slots: Vec<DofSlot>,
    pub n_free: usize,
}

/// Collects fixings and identifications before numbering the unknowns.
#[derive(Debug, Clone)]
pub struct DofMapBuilder {
    parent: Vec<usize>,
    fixed: Vec<Option<f64>>,
}

impl DofMapBuilder {
    pub fn new(n_dofs: usize) -> Self {
        Self { parent: (0..n_dofs).collect(), fixed: vec![None; n_dofs] }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    pub fn fix(&mut self, dof: usize, value: f64) {
        self.fixed[dof] = Some(value);
    }

    pub fn fix_node(&mut self, node: usize, value: [f64; 3]) {
        for c in 0..3 {
            self.fix(3 * node + c, value[c]);
        }
    }

    /// Forces two dofs to take the same value.
    pub fn tie(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index becomes the representative
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    pub fn tie_nodes(&mut self, a: usize, b: usize) {
        for c in 0..3 {
            self.tie(3 * a + c, 3 * b + c);
        }
    }

    pub fn build(mut self) -> Result<DofMap> {
        let n = self.parent.len();
        let mut class_value: Vec<Option<f64>> = vec![None; n];
        for d in 0..n {
            if let Some(v) = self.fixed[d] {
                let r = self.find(d);
                match class_value[r] {
                    Some(w) if (w - v).abs() > 1e-14 * w.abs().max(v.abs()).max(1.0) => {
                        return Err(Error::Config(format!("dof {d} fixed to conflicting values {w} and {v}")));
                    }
                    _ => class_value[r] = Some(v),
                }
            }
        }
        let mut index = vec![usize::MAX; n];
        let mut n_free = 0;
        let mut slots = Vec::with_capacity(n);
        for d in 0..n {
            let r = self.find(d);
            let slot = match class_value[r] {
                Some(v) => DofSlot::Fixed(v),
                None => {
                    if index[r] == usize::MAX {
                        index[r] = n_free;
                        n_free += 1;
                    }
                    DofSlot::Free(index[r])
                }
            };
            slots.push(slot);
        }
        Ok(DofMap { slots, n_free })
    }
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        self.slots.len()
    }

    /// All dofs free and distinct.
    pub fn identity(n: usize) -> Self {
        Self { slots: (0..n).map(DofSlot::Free).collect(), n_free: n }
    }

    pub fn fixed_values(&self) -> Vec<f64> {
        self.slots.iter().map(|s| if let DofSlot::Fixed(v) = s { *v } else { 0.0 }).collect()
    }

    pub fn expand(&self, ur: &[f64]) -> Vec<f64> {
        assert_eq!(ur.len(), self.n_free);
        self.slots
            .iter()
            .map(|s| match s {
                DofSlot::Free(i) => ur[*i],
                DofSlot::Fixed(v) => *v,
            })
            .collect()
    }

    /// Reduced coordinates of a full vector; for shared unknowns the last dof wins.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        let mut ur = vec![0.0; self.n_free];
        for (d, s) in self.slots.iter().enumerate() {
            if let DofSlot::Free(i) = s {
                ur[*i] = u[d];
            }
        }
        ur
    }

    /// P^T v.
    pub fn gather(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (d, s) in self.slots.iter().enumerate() {
            if let DofSlot::Free(i) = s {
                out[*i] += v[d];
            }
        }
        out
    }

    /// P^T K P.
    pub fn reduce_matrix(&self, k: &CsrMatrix) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.n_free, self.n_free, k.nnz());
        for r in 0..k.nrows {
            if let DofSlot::Free(i) = self.slots[r] {
                for (c, v) in k.row(r) {
                    if let DofSlot::Free(j) = self.slots[c] {
                        t.push(i, j, v);
                    }
                }
            }
        }
        t.build()
    }

    /// P^T (f - K u_D).
    pub fn reduce_rhs(&self, k: &CsrMatrix, f: &[f64]) -> Vec<f64> {
        let ud = self.fixed_values();
        let kud = k.mul_vec(&ud);
        let r: Vec<f64> = f.iter().zip(&kud).map(|(a, b)| a - b).collect();
        self.gather(&r)
    }

    pub fn is_free(&self, d: usize) -> bool {
        matches!(self.slots[d], DofSlot::Free(_))
    }
}

/// Boundary handling shared by the mesh-level problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralCondition {
    /// Traction-free lateral faces.
    #[default]
    Free,
    /// Zero normal displacement on each lateral face.
    Roller,
    /// Opposite lateral faces identified.
    Periodic,
}

/// Clamps the mesh's Gamma nodes, fixes nodes no element uses, and applies
/// the requested lateral condition.
pub fn mesh_dof_map(mesh: &HexMesh, lateral: LateralCondition) -> Result<DofMap> {
    mesh_dof_builder(mesh, lateral)?.build()
}

/// The constraints of [`mesh_dof_map`], open for further ties.
pub fn mesh_dof_builder(mesh: &HexMesh, lateral: LateralCondition) -> Result<DofMapBuilder> {
    let mut b = DofMapBuilder::new(mesh.dof_count());
    for &n in &mesh.boundary.gamma {
        b.fix_node(n, [0.0; 3]);
    }
    for (n, used) in mesh.used_nodes().into_iter().enumerate() {
        if !used {
            b.fix_node(n, [0.0; 3]);
        }
    }
    match lateral {
        LateralCondition::Free => {}
        LateralCondition::Roller => {
            for (face, nodes) in mesh.boundary.lateral.iter().enumerate() {
                let axis = face / 2;
                for &n in nodes {
                    b.fix(3 * n + axis, 0.0);
                }
            }
        }
        LateralCondition::Periodic => {
            for (face, partner) in [(0usize, 1usize), (2, 3)] {
                let axis = face / 2;
                let lo = &mesh.boundary.lateral[face];
                let hi = &mesh.boundary.lateral[partner];
                // face lists are generated in the same order on opposite sides
                if lo.len() != hi.len() {
                    return Err(Error::Config("lateral faces have different node counts".into()));
                }
                for (&m, &n) in lo.iter().zip(hi) {
                    let (xm, xn) = (mesh.nodes[m], mesh.nodes[n]);
                    let other = 1 - axis;
                    if xm[other] != xn[other] || xm[2] != xn[2] {
                        return Err(Error::Config(format!("node {n} has no periodic image")));
                    }
                    b.tie_nodes(m, n);
                }
            }
        }
    }
    Ok(b)
}
