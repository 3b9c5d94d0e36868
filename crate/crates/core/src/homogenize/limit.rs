//! Discretized unfolded limit problem with contact.
//!
//! The layer is replaced by one copy of the cell mesh per interface node x'_g
//! of the block grid, weighted by the lumped interface weight of that node.
//! The inclusion copies carry w^j = u^j + s^j, the full inclusion displacement;
//! energy, friction and gaps only see w^j since s^j is rigid. Afterwards s^j
//! (the fields c^j, d^j) is recovered by rigid projection.

use serde::{Deserialize, Serialize};

use super::transmission::sigma_weights;
use crate::assembly::{add_top_traction, assemble_body_load, assemble_stiffness, assemble_strain_form, Loads, Materials};
use crate::contact::{minimize, sample_facet_data, ContactData, ContactProblem, DataNorms, ProblemParts, SolveReport, SolverOptions};
use crate::dofs::{mesh_dof_builder, DofMap, LateralCondition};
use crate::error::{Error, Result};
use crate::fem::{gauss_points, map_point};
use crate::geometry::CellGeometry;
use crate::mesh::{FieldState, HexMesh, LayerLayout, NodeKind, Region};
use crate::rigid::{rigid_eval, rigid_fields};

/// Block mesh plus the weighted cell copies.
#[derive(Debug, Clone)]
pub struct LimitMesh {
    pub mesh: HexMesh,
    /// Nodes below this index belong to the blocks.
    pub block_nodes: usize,
    /// x'_g of each copy.
    pub positions: Vec<[f64; 2]>,
    /// Lumped interface weight of each copy.
    pub weights: Vec<f64>,
}

impl LimitMesh {
    pub fn template(&self) -> &HexMesh {
        &self.mesh.layout.as_ref().expect("limit mesh has a layout").template
    }

    pub fn copies(&self) -> usize {
        self.positions.len()
    }
}

/// `template` is a cell mesh (possibly with the inclusions removed).
pub fn build_limit_mesh(blocks: &HexMesh, template: &HexMesh) -> Result<LimitMesh> {
    if blocks.layout.is_some() || !blocks.facets.is_empty() {
        return Err(Error::InvalidDomain("limit problem needs a block-only mesh".into()));
    }
    if template.boundary.sigma.is_empty() || template.boundary.s_a.is_empty() {
        return Err(Error::InvalidCell("cell mesh has no top or bottom face".into()));
    }
    let weights = sigma_weights(blocks);
    let [nx, ny, _] = blocks.grid.dims();
    if weights.len() != blocks.boundary.interface_pairs.len() {
        return Err(Error::InvalidDomain("interface pairs do not match the block grid".into()));
    }
    let mut mesh = blocks.clone();
    let block_nodes = mesh.nodes.len();
    let tn = template.node_count();
    let mut positions = Vec::with_capacity(weights.len());
    let (mut xi, mut cell_nodes, mut cell_elements, mut cell_facets) = (vec![], vec![], vec![], vec![]);
    for (g, &w) in weights.iter().enumerate() {
        let (i, j) = (g % nx, g / nx);
        positions.push([blocks.grid.x[i], blocks.grid.y[j]]);
        xi.push([i, j]);
        let off = mesh.nodes.len();
        for y in &template.nodes {
            mesh.nodes.push([i as f64 + y[0], j as f64 + y[1], y[2]]);
        }
        mesh.kinds.extend(template.kinds.iter().map(|k| match *k {
            NodeKind::Base => NodeKind::Base,
            NodeKind::InclusionCopy { inclusion, base } => NodeKind::InclusionCopy { inclusion, base: base + off },
            NodeKind::CrackCopy { crack, base } => NodeKind::CrackCopy { crack, base: base + off },
        }));
        cell_nodes.push((off..off + tn).collect::<Vec<_>>());
        let e0 = mesh.elements.len();
        for (t, el) in template.elements.iter().enumerate() {
            let mut el = el.clone();
            el.nodes = el.nodes.map(|n| n + off);
            el.cell = Some(g);
            el.local = Some(t);
            el.weight *= w;
            mesh.elements.push(el);
        }
        cell_elements.push((e0..mesh.elements.len()).collect::<Vec<_>>());
        let f0 = mesh.facets.len();
        for (t, f) in template.facets.iter().enumerate() {
            let mut f = f.clone();
            f.plus = f.plus.map(|n| n + off);
            f.minus = f.minus.map(|n| n + off);
            f.cell = Some(g);
            f.local = Some(t);
            f.area *= w;
            mesh.facets.push(f);
        }
        cell_facets.push((f0..mesh.facets.len()).collect::<Vec<_>>());
        mesh.periodic.extend(template.periodic.iter().map(|&(s, m)| (s + off, m + off)));
    }
    mesh.layout = Some(LayerLayout { eps: 1.0, cells: [nx, ny], xi, template: Box::new(template.clone()), cell_nodes, cell_elements, cell_facets });
    mesh.n_cell = template.n_cell;
    Ok(LimitMesh { mesh, block_nodes, positions, weights })
}

/// Clamping and laterals of the blocks, periodicity inside each copy, and the
/// interface matching: bottom cell face to u^b, top cell face to u^a.
pub fn limit_dofs(limit: &LimitMesh, lateral: LateralCondition) -> Result<DofMap> {
    let mut b = mesh_dof_builder(&limit.mesh, lateral)?;
    for &(s, m) in &limit.mesh.periodic {
        b.tie_nodes(s, m);
    }
    let lay = limit.mesh.layout.as_ref().expect("limit mesh has a layout");
    for (g, &(nb, na)) in limit.mesh.boundary.interface_pairs.iter().enumerate() {
        let nodes = &lay.cell_nodes[g];
        for &t in &lay.template.boundary.sigma {
            b.tie_nodes(nodes[t], nb);
        }
        for &t in &lay.template.boundary.s_a {
            b.tie_nodes(nodes[t], na);
        }
    }
    b.build()
}

/// f on the blocks, F^j(x'_g, y) on the inclusion copies, and the top traction.
pub fn limit_load(limit: &LimitMesh, loads: &Loads) -> Result<Vec<f64>> {
    let families =
        limit.template().elements.iter().filter_map(|e| if let Region::Inclusion(j) = e.region { Some(j) } else { None }).max().unwrap_or(0);
    if loads.inclusion_forces.len() > families {
        return Err(Error::InvalidLoad(format!("{} inclusion forces given but the cell has {families} inclusions", loads.inclusion_forces.len())));
    }
    let mesh = &limit.mesh;
    let mut rhs = assemble_body_load(mesh, |e, x| {
        let el = &mesh.elements[e];
        match el.region {
            Region::BlockA | Region::BlockB => Some(loads.f.eval(x, [0.0; 3])),
            Region::Inclusion(j) => {
                let fj = loads.inclusion_forces.get(j - 1)?;
                let g = el.cell?;
                let (anchor, y) = copy_coordinates(limit, g, x);
                Some(fj.eval(anchor, y))
            }
            Region::Matrix => None,
        }
    });
    if let Some(t) = loads.top_traction {
        add_top_traction(mesh, t, &mut rhs);
    }
    Ok(rhs)
}

fn copy_coordinates(limit: &LimitMesh, g: usize, x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let xi = limit.mesh.layout.as_ref().expect("limit mesh has a layout").xi[g];
    let p = limit.positions[g];
    ([p[0], p[1], 0.0], [x[0] - xi[0] as f64, x[1] - xi[1] as f64, x[2]])
}

fn limit_norms(limit: &LimitMesh, loads: &Loads, gap: &[f64]) -> DataNorms {
    let mesh = &limit.mesh;
    let mut out = DataNorms::default();
    let mut f_sq = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        let (lo, hi) = mesh.element_box(e);
        let h = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let det = h[0] * h[1] * h[2] / 8.0 * el.weight;
        for r in gauss_points() {
            let x = map_point(lo, h, r);
            match el.region {
                Region::BlockA | Region::BlockB => {
                    let v = loads.f.eval(x, [0.0; 3]);
                    f_sq += (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * det;
                }
                Region::Inclusion(j) => {
                    if let (Some(fj), Some(g)) = (loads.inclusion_forces.get(j - 1), el.cell) {
                        let (anchor, y) = copy_coordinates(limit, g, x);
                        let v = fj.eval(anchor, y);
                        out.inclusion_sup = out.inclusion_sup.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
                    }
                }
                Region::Matrix => {}
            }
        }
    }
    out.f_l2 = f_sq.sqrt();
    let families = mesh.facets.iter().map(|f| f.crack + 1).max().unwrap_or(0);
    out.gap_l1 = vec![0.0; families];
    for (fi, f) in mesh.facets.iter().enumerate() {
        for k in 0..4 {
            out.gap_l1[f.crack] += f.area / 4.0 * gap[4 * fi + k];
        }
    }
    out
}

/// The limit problem in the form solved by the contact minimizer (eps = 1).
#[derive(Debug, Clone)]
pub struct LimitProblem {
    pub limit: LimitMesh,
    pub cell: CellGeometry,
    pub contact: ContactProblem,
}

impl LimitProblem {
    pub fn assemble(
        blocks: &HexMesh,
        template: &HexMesh,
        cell: &CellGeometry,
        materials: &Materials,
        loads: &Loads,
        data: &ContactData,
        lateral: LateralCondition,
    ) -> Result<Self> {
        let limit = build_limit_mesh(blocks, template)?;
        let positions = limit.positions.clone();
        let anchor = move |g: usize| [positions[g][0], positions[g][1], 0.0];
        let (facet_data, friction_lower) = sample_facet_data(&limit.mesh, data, Some(&anchor))?;
        let norms = limit_norms(&limit, loads, &facet_data.gap);
        let parts = ProblemParts {
            eps: 1.0,
            dofs: limit_dofs(&limit, lateral)?,
            stiffness: assemble_stiffness(&limit.mesh, materials, 1.0)?,
            load: limit_load(&limit, loads)?,
            strain_form: assemble_strain_form(&limit.mesh, 1.0),
            facet_data,
            friction_lower,
            norms,
        };
        let contact = ContactProblem::from_parts(&limit.mesh, parts)?;
        Ok(Self { limit, cell: cell.clone(), contact })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitState {
    /// u^b and u^a on the block part of the limit mesh (block node numbering).
    pub blocks: FieldState,
    /// Per interface node: u^0 on the matrix nodes and u^j (orthogonal to rigid
    /// motions) on the inclusion nodes of the cell mesh.
    pub layer: Vec<FieldState>,
    /// rigid[j - 1][g] = (c^j, d^j) at x'_g.
    pub rigid: Vec<Vec<([f64; 3], [f64; 3])>>,
    pub m: f64,
    /// The state on the whole limit mesh, with w^j on the inclusions.
    pub full: FieldState,
}

impl LimitState {
    pub fn trace_b(&self, blocks: &HexMesh) -> Vec<[f64; 3]> {
        blocks.boundary.interface_pairs.iter().map(|&(b, _)| self.blocks.node(b)).collect()
    }

    pub fn trace_a(&self, blocks: &HexMesh) -> Vec<[f64; 3]> {
        blocks.boundary.interface_pairs.iter().map(|&(_, a)| self.blocks.node(a)).collect()
    }
}

/// Splits a state of the limit mesh into block fields, cell fields and rigid parts.
pub fn split_limit_state(problem: &LimitProblem, full: &FieldState) -> Result<LimitState> {
    let limit = &problem.limit;
    let lay = limit.mesh.layout.as_ref().expect("limit mesh has a layout");
    let rf = rigid_fields(&limit.mesh, &problem.cell, full)?;
    let template = &lay.template;
    let mut owner = vec![0usize; template.node_count()];
    for el in &template.elements {
        if let Region::Inclusion(j) = el.region {
            for &n in &el.nodes {
                owner[n] = j;
            }
        }
    }
    let layer = (0..limit.copies())
        .map(|g| {
            let nodes = &lay.cell_nodes[g];
            let mut s = FieldState::zeros(template);
            for (t, &n) in nodes.iter().enumerate() {
                let mut v = full.node(n);
                let j = owner[t];
                if j >= 1 {
                    let (c, d) = rf.entries[j - 1][g];
                    let r = rigid_eval(c, d, problem.cell.centers[j - 1], template.nodes[t]);
                    v = [v[0] - r[0], v[1] - r[1], v[2] - r[2]];
                }
                s.set_node(t, v);
            }
            s
        })
        .collect();
    let blocks = FieldState { values: full.values[..3 * limit.block_nodes].to_vec() };
    Ok(LimitState { blocks, layer, rigid: rf.entries, m: problem.contact.energy(full), full: full.clone() })
}

pub fn solve_unfolded_limit(problem: &LimitProblem, opts: &SolverOptions) -> Result<(LimitState, SolveReport)> {
    let (full, report) = minimize(&problem.contact, opts)?;
    let mut state = split_limit_state(problem, &full)?;
    state.m = report.m_eps;
    Ok((state, report))
}
