//! Structured hexahedral meshes with node duplication across cracks.
//!
//! Every node carries three dofs (`3 * node + component`). Crack faces are
//! realized by distinct nodes at coincident positions, so jumps are plain
//! differences of dof values.

mod cell;
mod layered;

pub use cell::mesh_cell;
pub use layered::{block_levels, mesh_assembly, mesh_blocks, LayerLayout};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    BlockB,
    BlockA,
    /// Matrix part of the layer (Y^0 in cell coordinates).
    Matrix,
    /// Inclusion j >= 1.
    Inclusion(usize),
}

impl Region {
    pub fn in_layer(self) -> bool {
        matches!(self, Region::Matrix | Region::Inclusion(_))
    }
}

/// Node order: (0,0,0) (1,0,0) (1,1,0) (0,1,0) then the same at z = 1.
pub const HEX_CORNERS: [[usize; 3]; 8] = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];

/// Local nodes of the face of a hex with outward normal `sign * e_axis`,
/// listed counterclockwise in the face plane.
pub fn hex_face(axis: usize, positive: bool) -> [usize; 4] {
    match (axis, positive) {
        (0, false) => [0, 3, 7, 4],
        (0, true) => [1, 2, 6, 5],
        (1, false) => [0, 1, 5, 4],
        (1, true) => [3, 2, 6, 7],
        (2, false) => [0, 1, 2, 3],
        _ => [4, 5, 6, 7],
    }
}

/// Provenance of a node: grid node or a duplicate made for a crack face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Base,
    InclusionCopy { inclusion: usize, base: usize },
    CrackCopy { crack: usize, base: usize },
}

impl NodeKind {
    pub fn base(self) -> Option<usize> {
        match self {
            NodeKind::Base => None,
            NodeKind::InclusionCopy { base, .. } | NodeKind::CrackCopy { base, .. } => Some(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub nodes: [usize; 8],
    pub region: Region,
    /// Layer cell the element belongs to.
    pub cell: Option<usize>,
    /// Index of the element in the cell template.
    pub local: Option<usize>,
    /// Extra integration weight (1 except in product-measure meshes).
    pub weight: f64,
}

/// A pair of coincident faces across a crack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrackFacet {
    /// Nodes on the side the normal points away from (the inclusion for j >= 1,
    /// the x + t nu side for open cracks).
    pub plus: [usize; 4],
    pub minus: [usize; 4],
    pub normal_axis: usize,
    /// +1 or -1.
    pub normal_sign: f64,
    /// 0 for open cracks, j >= 1 for the boundary of inclusion j.
    pub crack: usize,
    pub cell: Option<usize>,
    /// Index of the facet in the cell template.
    pub local: Option<usize>,
    /// Measure of the facet used in the lumped surface integrals.
    pub area: f64,
}

impl CrackFacet {
    pub fn normal(&self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.normal_axis] = self.normal_sign;
        n
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTags {
    /// Clamped nodes.
    pub gamma: Vec<usize>,
    /// Nodes on the lower face of the layer (or of the upper block in block-only meshes).
    pub sigma: Vec<usize>,
    /// Nodes on the upper face of the layer.
    pub s_a: Vec<usize>,
    /// x = min, x = max, y = min, y = max.
    pub lateral: [Vec<usize>; 4],
    /// Top face of the upper block.
    pub top: Vec<usize>,
    pub top_facets: Vec<[usize; 4]>,
    /// (lower-block node, upper-block node) pairs on the interface of a block-only mesh.
    pub interface_pairs: Vec<(usize, usize)>,
}

/// Tensor-product grid of the base (non-duplicated) nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl GridInfo {
    pub fn dims(&self) -> [usize; 3] {
        [self.x.len(), self.y.len(), self.z.len()]
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.y.len() + j) * self.x.len() + i
    }

    pub fn base_count(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexMesh {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<Element>,
    pub facets: Vec<CrackFacet>,
    pub boundary: BoundaryTags,
    /// Lateral periodicity as (slave, master) node pairs; masters are never slaves.
    pub periodic: Vec<(usize, usize)>,
    pub kinds: Vec<NodeKind>,
    pub grid: GridInfo,
    /// Present for meshes of the layered domain.
    pub layout: Option<LayerLayout>,
    /// Subdivisions per axis of the cell template.
    pub n_cell: usize,
}

impl HexMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        3 * self.nodes.len()
    }

    /// Lower and upper corners of an element (elements are axis-aligned boxes).
    pub fn element_box(&self, e: usize) -> ([f64; 3], [f64; 3]) {
        let el = &self.elements[e];
        (self.nodes[el.nodes[0]], self.nodes[el.nodes[6]])
    }

    pub fn element_size(&self, e: usize) -> [f64; 3] {
        let (lo, hi) = self.element_box(e);
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]]
    }

    /// Nodes referenced by at least one element.
    pub fn used_nodes(&self) -> Vec<bool> {
        let mut used = vec![false; self.nodes.len()];
        for el in &self.elements {
            for &n in &el.nodes {
                used[n] = true;
            }
        }
        used
    }

    pub fn total_crack_area(&self, crack: usize) -> f64 {
        self.facets.iter().filter(|f| f.crack == crack).map(|f| f.area).sum()
    }

    /// Copy of the mesh without the elements of the given regions. Facets on
    /// removed elements are dropped as well.
    pub fn without_regions(&self, drop: impl Fn(Region) -> bool) -> HexMesh {
        let mut m = self.clone();
        m.elements.retain(|e| !drop(e.region));
        m.facets.retain(|f| !(f.crack >= 1 && drop(Region::Inclusion(f.crack))));
        m
    }

    /// Copy of the mesh in which the inclusions are glued to the matrix:
    /// their duplicated nodes are merged back and their facets removed.
    pub fn glue_inclusions(&self) -> HexMesh {
        self.glued(false)
    }

    /// Copy of the mesh with every crack (open ones included) glued shut.
    pub fn glue_all(&self) -> HexMesh {
        self.glued(true)
    }

    fn glued(&self, open_too: bool) -> HexMesh {
        let mut m = self.clone();
        let remap: Vec<usize> = m
            .kinds
            .iter()
            .enumerate()
            .map(|(n, k)| match k {
                NodeKind::InclusionCopy { base, .. } => *base,
                NodeKind::CrackCopy { base, .. } if open_too => *base,
                _ => n,
            })
            .collect();
        for el in &mut m.elements {
            for n in el.nodes.iter_mut() {
                *n = remap[*n];
            }
        }
        m.facets.retain(|f| !open_too && f.crack == 0);
        m
    }
}

/// Displacement vector over all mesh dofs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub values: Vec<f64>,
}

impl FieldState {
    pub fn zeros(mesh: &HexMesh) -> Self {
        Self { values: vec![0.0; mesh.dof_count()] }
    }

    pub fn from_fn(mesh: &HexMesh, f: impl Fn(usize, [f64; 3]) -> [f64; 3]) -> Self {
        let mut values = vec![0.0; mesh.dof_count()];
        for (n, x) in mesh.nodes.iter().enumerate() {
            let v = f(n, *x);
            values[3 * n..3 * n + 3].copy_from_slice(&v);
        }
        Self { values }
    }

    pub fn node(&self, n: usize) -> [f64; 3] {
        [self.values[3 * n], self.values[3 * n + 1], self.values[3 * n + 2]]
    }

    pub fn set_node(&mut self, n: usize, v: [f64; 3]) {
        self.values[3 * n..3 * n + 3].copy_from_slice(&v);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Normal and tangential jump at one facet node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeJump {
    pub normal: f64,
    pub tangential: [f64; 3],
}

/// Jumps u(plus) - u(minus) at the four nodes of a facet, split along its normal.
pub fn jump(mesh: &HexMesh, state: &FieldState, facet: usize) -> [NodeJump; 4] {
    let f = &mesh.facets[facet];
    let nu = f.normal();
    let mut out = [NodeJump { normal: 0.0, tangential: [0.0; 3] }; 4];
    for k in 0..4 {
        let p = state.node(f.plus[k]);
        let m = state.node(f.minus[k]);
        let d = [p[0] - m[0], p[1] - m[1], p[2] - m[2]];
        let dn = d[0] * nu[0] + d[1] * nu[1] + d[2] * nu[2];
        out[k] = NodeJump { normal: dn, tangential: [d[0] - dn * nu[0], d[1] - dn * nu[1], d[2] - dn * nu[2]] };
    }
    out
}

/// n + 1 equally spaced levels from lo to hi, endpoints exact.
pub fn uniform_levels(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..=n).map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 }).collect()
}
