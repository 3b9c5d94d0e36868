//! Unilateral contact with Tresca friction on the crack facets at fixed eps.
//!
//! Facet nodes that coincide (same plus node, same minus node, same normal)
//! are merged into one contact point carrying the summed lumped weight, so
//! the friction term and the gap constraint act once per geometric node.

mod admm;
mod diagnostics;

pub use admm::{minimize, SolveReport, SolverOptions};
pub use diagnostics::{bound_check, kkt_residuals, sample_feasible, vi_residual, BoundReport, KktResiduals};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_load, assemble_stiffness, assemble_strain_form, FacetNodeData, Loads, Materials};
use crate::dofs::{mesh_dof_map, DofMap, DofSlot, LateralCondition};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fem::{gauss_points, map_point};
use crate::mesh::{FieldState, HexMesh, Region};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Gap and friction data per crack family j = 0..m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ContactData {
    /// g^j(y); families without an entry have zero gap.
    pub gap: Vec<Expr>,
    /// G^j(x', y) with x' the cell anchor; families without an entry use 1.
    pub friction: Vec<Expr>,
    /// Declared lower bounds M^j. Without them the sampled minimum of G^j is used.
    pub friction_lower: Vec<f64>,
}

/// Cell anchor and cell coordinates of a facet node.
fn facet_node_coordinates(mesh: &HexMesh, facet: usize, k: usize) -> ([f64; 3], [f64; 3]) {
    let f = &mesh.facets[facet];
    let x = mesh.nodes[f.plus[k]];
    match (&mesh.layout, f.cell) {
        (Some(lay), Some(c)) => {
            let eps = lay.eps;
            let lo = [eps * lay.xi[c][0] as f64, eps * lay.xi[c][1] as f64];
            ([lo[0], lo[1], 0.0], [(x[0] - lo[0]) / eps, (x[1] - lo[1]) / eps, x[2] / eps])
        }
        _ => ([x[0], x[1], 0.0], x),
    }
}

/// Samples g^j and G^j at every facet node. `anchor` maps a layer cell to the
/// slow variable x' passed to G^j; `None` uses eps xi.
pub fn sample_facet_data(mesh: &HexMesh, data: &ContactData, anchor: Option<&dyn Fn(usize) -> [f64; 3]>) -> Result<(FacetNodeData, Vec<f64>)> {
    let families = mesh.facets.iter().map(|f| f.crack + 1).max().unwrap_or(0);
    if data.gap.len() > families.max(1) || data.friction.len() > families.max(1) {
        return Err(Error::InvalidContact(format!("data given for more crack families than the mesh has ({families})")));
    }
    if let Some(e) = data.gap.iter().find(|e| e.depends_on_position()) {
        return Err(Error::InvalidContact(format!("gap '{}' must depend on the cell variable only", e.source())));
    }
    let one = Expr::constant(1.0);
    let zero = Expr::constant(0.0);
    let n = 4 * mesh.facets.len();
    let mut out = FacetNodeData { gap: Vec::with_capacity(n), friction: Vec::with_capacity(n) };
    let mut sampled_min = vec![f64::INFINITY; families];
    for (fi, f) in mesh.facets.iter().enumerate() {
        let j = f.crack;
        let g_expr = data.gap.get(j).unwrap_or(&zero);
        let big_g = data.friction.get(j).unwrap_or(&one);
        for k in 0..4 {
            let (mut slow, y) = facet_node_coordinates(mesh, fi, k);
            if let (Some(map), Some(c)) = (anchor, f.cell) {
                slow = map(c);
            }
            let g = g_expr.eval([0.0; 3], y);
            let gg = big_g.eval(slow, y);
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::InvalidContact(format!("gap of family {j} is {g} at a facet node; must be finite and >= 0")));
            }
            if !(gg > 0.0) || !gg.is_finite() {
                return Err(Error::InvalidContact(format!("friction bound of family {j} is {gg}; must be finite and > 0")));
            }
            sampled_min[j] = sampled_min[j].min(gg);
            out.gap.push(g);
            out.friction.push(gg);
        }
    }
    let mut lower = Vec::with_capacity(families);
    for (j, m) in sampled_min.iter().enumerate() {
        let declared = data.friction_lower.get(j).copied();
        let m = if m.is_finite() { *m } else { declared.unwrap_or(1.0) };
        match declared {
            Some(d) if !(d > 0.0) => return Err(Error::InvalidContact(format!("lower friction bound M^{j} = {d} must be positive"))),
            Some(d) if d > m * (1.0 + 1e-12) => {
                return Err(Error::InvalidContact(format!("friction bound of family {j} drops to {m} below the declared M^{j} = {d}")))
            }
            Some(d) => lower.push(d),
            None => lower.push(m),
        }
    }
    Ok((out, lower))
}

/// Sizes of the data entering the a-priori bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DataNorms {
    /// eps max_j sup |f^j_eps| = max_j sup |F^j|.
    pub inclusion_sup: f64,
    /// ||f||_{L2} over the blocks and the matrix.
    pub f_l2: f64,
    /// ||g^k||_{L1(S^k)} per family, lumped.
    pub gap_l1: Vec<f64>,
}

impl DataNorms {
    pub fn combination(&self) -> f64 {
        self.inclusion_sup + self.f_l2 + self.gap_l1.iter().sum::<f64>()
    }
}

pub fn data_norms(mesh: &HexMesh, loads: &Loads, eps: f64, facet_data: &FacetNodeData) -> DataNorms {
    let mut out = DataNorms::default();
    let mut f_sq = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        let (lo, hi) = mesh.element_box(e);
        let h = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let det = h[0] * h[1] * h[2] / 8.0 * el.weight;
        for r in gauss_points() {
            let x = map_point(lo, h, r);
            match el.region {
                Region::Inclusion(j) => {
                    if let Some(fj) = loads.inclusion_forces.get(j - 1) {
                        let (anchor, y) = crate::assembly::cell_coordinates(mesh, e, x, eps);
                        let v = fj.eval(anchor, y);
                        out.inclusion_sup = out.inclusion_sup.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
                    }
                }
                _ => {
                    let v = loads.f.eval(x, [0.0; 3]);
                    f_sq += (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * det;
                }
            }
        }
    }
    out.f_l2 = f_sq.sqrt();
    let families = mesh.facets.iter().map(|f| f.crack + 1).max().unwrap_or(0);
    out.gap_l1 = vec![0.0; families];
    for (fi, f) in mesh.facets.iter().enumerate() {
        for k in 0..4 {
            out.gap_l1[f.crack] += f.area / 4.0 * facet_data.gap[4 * fi + k];
        }
    }
    out
}

/// One merged facet node: the jump u(plus) - u(minus) with normal sign * e_axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub plus: usize,
    pub minus: usize,
    pub axis: usize,
    pub sign: f64,
    pub crack: usize,
    /// Summed lumped area.
    pub weight: f64,
    pub gap: f64,
    /// Area-averaged friction bound.
    pub friction: f64,
}

impl ContactPoint {
    /// Normal and tangential parts of a jump vector.
    pub fn split(&self, d: [f64; 3]) -> (f64, [f64; 3]) {
        let mut t = d;
        t[self.axis] = 0.0;
        (self.sign * d[self.axis], t)
    }
}

/// Discrete Problem P_eps: quadratic energy, lumped Tresca term and nodewise gaps.
#[derive(Debug, Clone)]
pub struct ContactProblem {
    pub eps: f64,
    pub dofs: DofMap,
    pub stiffness: CsrMatrix,
    pub load: Vec<f64>,
    /// eps-weighted strain form used for the measure M(u).
    pub strain_form: CsrMatrix,
    pub facet_data: FacetNodeData,
    pub friction_lower: Vec<f64>,
    pub points: Vec<ContactPoint>,
    /// Contact point of facet node `4 f + k`, if any.
    pub facet_points: Vec<Option<usize>>,
    pub norms: DataNorms,
    pub(crate) k_red: CsrMatrix,
    pub(crate) f_red: Vec<f64>,
    /// Reduced jump operator: rows 3p + c give component c of point p's jump.
    pub(crate) jump_op: CsrMatrix,
    pub(crate) jump_offset: Vec<f64>,
    pub(crate) energy_offset: f64,
}

/// Operator pieces of a contact problem.
pub struct ProblemParts {
    pub eps: f64,
    pub dofs: DofMap,
    pub stiffness: CsrMatrix,
    pub load: Vec<f64>,
    pub strain_form: CsrMatrix,
    pub facet_data: FacetNodeData,
    pub friction_lower: Vec<f64>,
    pub norms: DataNorms,
}

impl ContactProblem {
    /// Full setup on a layered (or single-cell) mesh.
    pub fn assemble(mesh: &HexMesh, materials: &Materials, loads: &Loads, data: &ContactData, lateral: LateralCondition) -> Result<Self> {
        let eps = mesh.layout.as_ref().map_or(1.0, |l| l.eps);
        let stiffness = assemble_stiffness(mesh, materials, eps)?;
        let load = assemble_load(mesh, loads, eps)?;
        let (facet_data, friction_lower) = sample_facet_data(mesh, data, None)?;
        let norms = data_norms(mesh, loads, eps, &facet_data);
        let parts = ProblemParts {
            eps,
            dofs: mesh_dof_map(mesh, lateral)?,
            stiffness,
            load,
            strain_form: assemble_strain_form(mesh, eps),
            facet_data,
            friction_lower,
            norms,
        };
        Self::from_parts(mesh, parts)
    }

    pub fn from_parts(mesh: &HexMesh, p: ProblemParts) -> Result<Self> {
        if p.facet_data.gap.len() != 4 * mesh.facets.len() || p.facet_data.friction.len() != 4 * mesh.facets.len() {
            return Err(Error::InvalidContact("facet data length does not match the mesh".into()));
        }
        let mut merged: BTreeMap<(usize, usize, usize, bool), usize> = BTreeMap::new();
        let mut points: Vec<ContactPoint> = Vec::new();
        let mut weighted_g = Vec::new();
        let mut facet_points = vec![None; 4 * mesh.facets.len()];
        for (fi, f) in mesh.facets.iter().enumerate() {
            for k in 0..4 {
                let (plus, minus) = (f.plus[k], f.minus[k]);
                if plus == minus {
                    continue;
                }
                let w = f.area / 4.0;
                let g = p.facet_data.gap[4 * fi + k];
                let gg = p.facet_data.friction[4 * fi + k];
                let key = (plus, minus, f.normal_axis, f.normal_sign > 0.0);
                let id = *merged.entry(key).or_insert_with(|| {
                    points.push(ContactPoint {
                        plus,
                        minus,
                        axis: f.normal_axis,
                        sign: f.normal_sign,
                        crack: f.crack,
                        weight: 0.0,
                        gap: g,
                        friction: 0.0,
                    });
                    weighted_g.push(0.0);
                    points.len() - 1
                });
                let pt = &mut points[id];
                pt.weight += w;
                pt.gap = pt.gap.min(g);
                weighted_g[id] += w * gg;
                facet_points[4 * fi + k] = Some(id);
            }
        }
        for (pt, wg) in points.iter_mut().zip(&weighted_g) {
            pt.friction = if pt.weight > 0.0 { wg / pt.weight } else { 0.0 };
        }

        let mut t = TripletBuilder::with_capacity(3 * points.len(), p.dofs.n_free, 6 * points.len());
        let mut offset = vec![0.0; 3 * points.len()];
        for (i, pt) in points.iter().enumerate() {
            for c in 0..3 {
                let row = 3 * i + c;
                match p.dofs.slots[3 * pt.plus + c] {
                    DofSlot::Free(d) => t.push(row, d, 1.0),
                    DofSlot::Fixed(v) => offset[row] += v,
                }
                match p.dofs.slots[3 * pt.minus + c] {
                    DofSlot::Free(d) => t.push(row, d, -1.0),
                    DofSlot::Fixed(v) => offset[row] -= v,
                }
            }
        }
        let k_red = p.dofs.reduce_matrix(&p.stiffness);
        let f_red = p.dofs.reduce_rhs(&p.stiffness, &p.load);
        let ud = p.dofs.fixed_values();
        let energy_offset = 0.5 * p.stiffness.bilinear(&ud, &ud) - crate::sparse::dot(&p.load, &ud);
        Ok(Self {
            eps: p.eps,
            dofs: p.dofs,
            stiffness: p.stiffness,
            load: p.load,
            strain_form: p.strain_form,
            facet_data: p.facet_data,
            friction_lower: p.friction_lower,
            points,
            facet_points,
            norms: p.norms,
            k_red,
            f_red,
            jump_op: t.build(),
            jump_offset: offset,
            energy_offset,
        })
    }

    pub fn families(&self) -> usize {
        self.friction_lower.len()
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free
    }

    /// Jumps of all points from reduced coordinates, laid out 3p + c.
    pub(crate) fn jumps_reduced(&self, ur: &[f64]) -> Vec<f64> {
        let mut x = self.jump_op.mul_vec(ur);
        for (a, b) in x.iter_mut().zip(&self.jump_offset) {
            *a += b;
        }
        x
    }

    /// Jump of point `p` in a full state.
    pub fn point_jump(&self, state: &FieldState, p: usize) -> [f64; 3] {
        let pt = &self.points[p];
        let (a, b) = (state.node(pt.plus), state.node(pt.minus));
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    /// Lumped Tresca term from stacked jumps.
    pub(crate) fn friction_of(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .enumerate()
            .map(|(p, pt)| {
                let (_, t) = pt.split([x[3 * p], x[3 * p + 1], x[3 * p + 2]]);
                pt.weight * pt.friction * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt()
            })
            .sum()
    }

    /// Energy of reduced coordinates (the Tresca term uses the actual jumps).
    pub fn energy_reduced(&self, ur: &[f64]) -> f64 {
        let ku = self.k_red.mul_vec(ur);
        let quad = 0.5 * crate::sparse::dot(ur, &ku) - crate::sparse::dot(&self.f_red, ur);
        quad + self.energy_offset + self.friction_of(&self.jumps_reduced(ur))
    }

    pub fn energy(&self, state: &FieldState) -> f64 {
        self.energy_reduced(&self.dofs.restrict(&state.values))
    }

    /// Moves plus-side dofs along the normal until every gap constraint holds.
    pub fn make_feasible(&self, ur: &mut [f64]) {
        for _ in 0..4 {
            let x = self.jumps_reduced(ur);
            let mut changed = false;
            for (p, pt) in self.points.iter().enumerate() {
                let excess = pt.sign * x[3 * p + pt.axis] - pt.gap;
                if excess <= 0.0 {
                    continue;
                }
                match (self.dofs.slots[3 * pt.plus + pt.axis], self.dofs.slots[3 * pt.minus + pt.axis]) {
                    (DofSlot::Free(i), _) => ur[i] -= pt.sign * excess,
                    (_, DofSlot::Free(j)) => ur[j] += pt.sign * excess,
                    _ => continue,
                }
                changed = true;
            }
            if !changed {
                break;
            }
        }
    }

    /// Largest gap violation of a full state.
    pub fn violation(&self, state: &FieldState) -> f64 {
        (0..self.points.len())
            .map(|p| {
                let pt = &self.points[p];
                (pt.split(self.point_jump(state, p)).0 - pt.gap).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn expand(&self, ur: &[f64]) -> FieldState {
        FieldState { values: self.dofs.expand(ur) }
    }
}
