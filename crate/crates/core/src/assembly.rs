//! Stiffness, load vectors and the energy measures on the layered mesh.
//!
//! Layer elements (matrix and inclusions) carry the factor eps in every
//! elastic quantity; block elements carry 1. Element weights multiply all
//! integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::VectorExpr;
use crate::fem::{ddot, gauss_points, map_point, shape_values, strain_at, FormCache, Tensor};
use crate::mesh::{jump, FieldState, HexMesh, Region};
use crate::sparse::{dot, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64) -> Self {
        Self { lambda, mu }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let ok = self.mu > 0.0 && 3.0 * self.lambda + 2.0 * self.mu > 0.0 && self.lambda.is_finite() && self.mu.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMaterial(format!("{name}: need mu > 0 and 3 lambda + 2 mu > 0, got lambda = {}, mu = {}", self.lambda, self.mu)))
        }
    }

    /// sigma : e for strain e.
    pub fn energy_density(&self, e: &Tensor) -> f64 {
        let tr = e[0][0] + e[1][1] + e[2][2];
        self.lambda * tr * tr + 2.0 * self.mu * ddot(e, e)
    }
}

/// Regions left out of a configuration get lambda = mu = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Materials {
    pub block_a: Material,
    pub block_b: Material,
    pub matrix: Material,
    pub inclusion: Material,
}

impl Default for Materials {
    fn default() -> Self {
        Self::uniform(Material::new(1.0, 1.0))
    }
}

impl Materials {
    pub fn uniform(m: Material) -> Self {
        Self { block_a: m, block_b: m, matrix: m, inclusion: m }
    }

    pub fn for_region(&self, r: Region) -> Material {
        match r {
            Region::BlockA => self.block_a,
            Region::BlockB => self.block_b,
            Region::Matrix => self.matrix,
            Region::Inclusion(_) => self.inclusion,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.block_a.validate("block_a")?;
        self.block_b.validate("block_b")?;
        self.matrix.validate("matrix")?;
        self.inclusion.validate("inclusion")
    }

    /// Coercivity constant 2 min(mu).
    pub fn alpha_bar(&self) -> f64 {
        2.0 * [self.block_a.mu, self.block_b.mu, self.matrix.mu, self.inclusion.mu].into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Factor of the layer scaling: eps inside the layer, 1 in the blocks.
pub fn region_scale(region: Region, eps: f64) -> f64 {
    if region.in_layer() {
        eps
    } else {
        1.0
    }
}

/// Coefficients of the generic element form
/// c_lambda K_lambda + c_mu K_mu + c_mass (M x I) + c_lap (L x I).
#[derive(Debug, Clone, Copy, Default)]
pub struct FormCoefficients {
    pub lambda: f64,
    pub mu: f64,
    pub mass: f64,
    pub lap: f64,
}

/// Sparsity pattern of the node-coupling graph, expanded to 3 dofs per node.
pub fn dof_pattern(mesh: &HexMesh) -> CsrMatrix {
    let nn = mesh.node_count();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for el in &mesh.elements {
        for &a in &el.nodes {
            adj[a].extend_from_slice(&el.nodes);
        }
    }
    for (n, list) in adj.iter_mut().enumerate() {
        list.push(n);
        list.sort_unstable();
        list.dedup();
    }
    let mut row_ptr = Vec::with_capacity(3 * nn + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for list in &adj {
        for _ in 0..3 {
            for &m in list {
                col_idx.extend_from_slice(&[3 * m, 3 * m + 1, 3 * m + 2]);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let nnz = col_idx.len();
    CsrMatrix { nrows: 3 * nn, ncols: 3 * nn, row_ptr, col_idx, values: vec![0.0; nnz] }
}

/// Assembles a symmetric dof-level form element by element, in element order.
/// `coef` returns None for elements that do not contribute.
pub fn assemble_form(mesh: &HexMesh, coef: impl Fn(usize) -> Option<FormCoefficients>) -> CsrMatrix {
    let mut k = dof_pattern(mesh);
    let mut cache = FormCache::default();
    for (e, el) in mesh.elements.iter().enumerate() {
        let Some(c) = coef(e) else { continue };
        let w = el.weight;
        let forms = cache.get(mesh.element_size(e));
        for a in 0..8 {
            let na = el.nodes[a];
            let row0 = k.row_ptr[3 * na];
            let row_len = (k.row_ptr[3 * na + 1] - row0) / 3;
            let nbrs: Vec<usize> = (0..row_len).map(|t| k.col_idx[row0 + 3 * t] / 3).collect();
            for b in 0..8 {
                let nb = el.nodes[b];
                let pos = nbrs.binary_search(&nb).expect("node pair in pattern");
                let scalar = c.mass * forms.mass[a][b] + c.lap * forms.lap[a][b];
                for i in 0..3 {
                    let base = k.row_ptr[3 * na + i] + 3 * pos;
                    for j in 0..3 {
                        let mut v = c.lambda * forms.k_lambda[3 * a + i][3 * b + j] + c.mu * forms.k_mu[3 * a + i][3 * b + j];
                        if i == j {
                            v += scalar;
                        }
                        k.values[base + j] += w * v;
                    }
                }
            }
        }
    }
    k
}

/// Matrix of the eps-scaled elastic form. Every element needs a material.
pub fn assemble_stiffness(mesh: &HexMesh, materials: &Materials, eps: f64) -> Result<CsrMatrix> {
    materials.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidDomain(format!("eps must be positive, got {eps}")));
    }
    Ok(assemble_form(mesh, |e| {
        let r = mesh.elements[e].region;
        let m = materials.for_region(r);
        let s = region_scale(r, eps);
        Some(FormCoefficients { lambda: s * m.lambda, mu: s * m.mu, ..Default::default() })
    }))
}

/// Matrix of the eps-weighted strain form sum_regions s_r int e(u):e(v).
pub fn assemble_strain_form(mesh: &HexMesh, eps: f64) -> CsrMatrix {
    assemble_form(mesh, |e| {
        let s = region_scale(mesh.elements[e].region, eps);
        Some(FormCoefficients { mu: 0.5 * s, ..Default::default() })
    })
}

/// Matrix of the eps-weighted H1 form: gradients weighted by eps and the L2
/// part by 1/eps inside the layer, both by 1 in the blocks.
pub fn assemble_h1_form(mesh: &HexMesh, eps: f64) -> CsrMatrix {
    assemble_form(mesh, |e| {
        let s = region_scale(mesh.elements[e].region, eps);
        Some(FormCoefficients { lap: s, mass: 1.0 / s, ..Default::default() })
    })
}

/// Consistent L2 mass matrix restricted to elements accepted by `keep`.
pub fn assemble_mass(mesh: &HexMesh, keep: impl Fn(Region) -> bool) -> CsrMatrix {
    assemble_form(mesh, |e| keep(mesh.elements[e].region).then_some(FormCoefficients { mass: 1.0, ..Default::default() }))
}

/// Volume loads: f on the blocks and the matrix, F^j on inclusion j, and an
/// optional uniform traction on the top face (test configurations only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Loads {
    pub f: VectorExpr,
    /// F^1, F^2, ... in the variables (x, y) with x the cell anchor eps xi.
    pub inclusion_forces: Vec<VectorExpr>,
    pub top_traction: Option<[f64; 3]>,
}

impl Loads {
    pub fn is_zero(&self) -> bool {
        self.f.is_zero() && self.inclusion_forces.iter().all(VectorExpr::is_zero) && self.top_traction.is_none_or(|t| t == [0.0; 3])
    }
}

/// Cell anchor eps xi (with x3 = 0) and cell coordinates of a layer point.
pub fn cell_coordinates(mesh: &HexMesh, e: usize, x: [f64; 3], eps: f64) -> ([f64; 3], [f64; 3]) {
    match (&mesh.layout, mesh.elements[e].cell) {
        (Some(lay), Some(c)) => {
            let xi = lay.xi[c];
            let anchor = [eps * xi[0] as f64, eps * xi[1] as f64, 0.0];
            (anchor, [(x[0] - anchor[0]) / eps, (x[1] - anchor[1]) / eps, x[2] / eps])
        }
        _ => ([0.0; 3], [x[0] / eps, x[1] / eps, x[2] / eps]),
    }
}

/// Right-hand side for the body loads and the top traction.
pub fn assemble_load(mesh: &HexMesh, loads: &Loads, eps: f64) -> Result<Vec<f64>> {
    let families = mesh.elements.iter().filter_map(|e| if let Region::Inclusion(j) = e.region { Some(j) } else { None }).max().unwrap_or(0);
    if loads.inclusion_forces.len() > families {
        return Err(Error::InvalidLoad(format!("{} inclusion forces given but the mesh has {families} inclusions", loads.inclusion_forces.len())));
    }
    let body_zero = loads.f.is_zero();
    let mut rhs = assemble_body_load(mesh, |e, x| match mesh.elements[e].region {
        Region::Inclusion(j) => match loads.inclusion_forces.get(j - 1) {
            Some(fj) if !fj.is_zero() => {
                let (anchor, y) = cell_coordinates(mesh, e, x, eps);
                Some(fj.eval(anchor, y).map(|v| v / eps))
            }
            _ => None,
        },
        _ if !body_zero => Some(loads.f.eval(x, [0.0; 3])),
        _ => None,
    });
    if let Some(t) = loads.top_traction {
        add_top_traction(mesh, t, &mut rhs);
    }
    Ok(rhs)
}

/// Gauss quadrature of a body force density; `density` returns `None` for
/// elements without load (checked at the first Gauss point of each element).
pub fn assemble_body_load(mesh: &HexMesh, density: impl Fn(usize, [f64; 3]) -> Option<[f64; 3]>) -> Vec<f64> {
    let mut rhs = vec![0.0; mesh.dof_count()];
    let gp = gauss_points();
    for (e, el) in mesh.elements.iter().enumerate() {
        let (lo, hi) = mesh.element_box(e);
        let h = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let det = h[0] * h[1] * h[2] / 8.0 * el.weight;
        for r in gp {
            let Some(val) = density(e, map_point(lo, h, r)) else { break };
            let n = shape_values(r);
            for a in 0..8 {
                for c in 0..3 {
                    rhs[3 * el.nodes[a] + c] += val[c] * n[a] * det;
                }
            }
        }
    }
    rhs
}

/// Uniform traction on the top face, lumped to the facet corners.
pub fn add_top_traction(mesh: &HexMesh, t: [f64; 3], rhs: &mut [f64]) {
    for f in &mesh.boundary.top_facets {
        let (p, q) = (mesh.nodes[f[0]], mesh.nodes[f[2]]);
        let area = ((q[0] - p[0]) * (q[1] - p[1])).abs();
        for &n in f {
            for c in 0..3 {
                rhs[3 * n + c] += t[c] * area / 4.0;
            }
        }
    }
}

/// Local nodal values of an element.
pub fn element_values(mesh: &HexMesh, state: &FieldState, e: usize) -> [[f64; 3]; 8] {
    mesh.elements[e].nodes.map(|n| state.node(n))
}

/// Strain at the eight Gauss points of an element.
pub fn element_strains(mesh: &HexMesh, state: &FieldState, e: usize) -> [Tensor; 8] {
    let h = mesh.element_size(e);
    let u = element_values(mesh, state, e);
    gauss_points().map(|r| strain_at(h, r, &u))
}

/// Energy terms of a state. Elastic entries are values of the quadratic form
/// (without the factor 1/2); `strain_*` entries are the unweighted-material
/// strain norms squared with the layer factor eps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EnergyBreakdown {
    pub elastic_b: f64,
    pub elastic_a: f64,
    pub elastic_matrix: f64,
    pub elastic_inclusions: Vec<f64>,
    /// Tresca term per crack family j = 0..m.
    pub friction: Vec<f64>,
    pub load_work: f64,
    /// Square root of the weighted strain norm.
    pub xi: f64,
    /// L1 norms of positive normal and tangential jumps on closed cracks.
    pub eta: f64,
    pub m_value: f64,
    pub e_value: f64,
    pub total: f64,
}

/// Per facet node contact data, indexed `4 * facet + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FacetNodeData {
    pub gap: Vec<f64>,
    pub friction: Vec<f64>,
}

/// Evaluates every energy term of `state` element by element.
pub fn energy_breakdown(
    mesh: &HexMesh,
    materials: &Materials,
    eps: f64,
    state: &FieldState,
    load: &[f64],
    friction_bound: &[f64],
    families: usize,
) -> EnergyBreakdown {
    let mut out = EnergyBreakdown { elastic_inclusions: vec![0.0; families], friction: vec![0.0; families + 1], ..Default::default() };
    let mut strain_sq = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        let size = mesh.element_size(e);
        let det = size[0] * size[1] * size[2] / 8.0 * el.weight;
        let mat = materials.for_region(el.region);
        let s = region_scale(el.region, eps);
        let mut energy = 0.0;
        let mut ee = 0.0;
        for st in element_strains(mesh, state, e) {
            energy += mat.energy_density(&st) * det;
            ee += ddot(&st, &st) * det;
        }
        strain_sq += s * ee;
        let energy = s * energy;
        match el.region {
            Region::BlockB => out.elastic_b += energy,
            Region::BlockA => out.elastic_a += energy,
            Region::Matrix => out.elastic_matrix += energy,
            Region::Inclusion(j) => {
                if j > out.elastic_inclusions.len() {
                    out.elastic_inclusions.resize(j, 0.0);
                }
                out.elastic_inclusions[j - 1] += energy;
            }
        }
    }
    for (fi, f) in mesh.facets.iter().enumerate() {
        if f.crack >= out.friction.len() {
            out.friction.resize(f.crack + 1, 0.0);
        }
        let w = f.area / 4.0;
        for (k, jmp) in jump(mesh, state, fi).iter().enumerate() {
            let t = (jmp.tangential[0].powi(2) + jmp.tangential[1].powi(2) + jmp.tangential[2].powi(2)).sqrt();
            let g = friction_bound.get(4 * fi + k).copied().unwrap_or(0.0);
            out.friction[f.crack] += w * g * t;
            if f.crack >= 1 {
                out.eta += w * (jmp.normal.max(0.0) + t);
            }
        }
    }
    out.load_work = dot(load, &state.values);
    out.xi = strain_sq.sqrt();
    out.m_value = out.xi + out.eta;
    out.e_value = strain_sq + out.eta;
    let elastic = out.elastic_b + out.elastic_a + out.elastic_matrix + out.elastic_inclusions.iter().sum::<f64>();
    out.total = 0.5 * elastic + out.friction.iter().sum::<f64>() - out.load_work;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofs::{mesh_dof_map, LateralCondition};
    use crate::geometry::{build_unit_cell, tile_layer, BlockFace, CellGeometry, CellSpec};
    use crate::mesh::{mesh_assembly, mesh_blocks, mesh_cell};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inclusion_cell() -> CellGeometry {
        build_unit_cell(&CellSpec { inclusions: vec![[0.25, 0.25, 0.25, 0.75, 0.75, 0.75]], open_cracks: vec![] }).unwrap()
    }

    fn layered(eps: f64) -> HexMesh {
        let g = inclusion_cell();
        let d = tile_layer(&g, [1.0, 1.0], 1.0, eps).unwrap();
        mesh_assembly(&d, &g, 4, 2, 1.5).unwrap()
    }

    fn mats() -> Materials {
        Materials {
            block_a: Material::new(1.0, 2.0),
            block_b: Material::new(0.5, 1.0),
            matrix: Material::new(2.0, 0.5),
            inclusion: Material::new(1.0, 3.0),
        }
    }

    fn random_state(mesh: &HexMesh, seed: u64) -> FieldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldState { values: (0..mesh.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect() }
    }

    #[test]
    fn translation_is_in_the_kernel() {
        let m = layered(0.5);
        let k = assemble_stiffness(&m, &mats(), 0.5).unwrap();
        assert_eq!(k.asymmetry(), 0.0);
        let t = FieldState::from_fn(&m, |_, _| [0.3, -1.0, 2.0]);
        let r = k.mul_vec(&t.values);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn clamped_block_is_positive_definite() {
        let m = mesh_blocks([1.0, 1.0], 1.0, [2, 2], 2, 1.0, &[BlockFace::Bottom]).unwrap();
        // lower block only, 2x2x2 elements
        let lower = m.without_regions(|r| r == Region::BlockA);
        let k = assemble_stiffness(&lower, &Materials::uniform(Material::new(1.0, 1.0)), 1.0).unwrap();
        let map = mesh_dof_map(&lower, LateralCondition::Free).unwrap();
        let kr = map.reduce_matrix(&k);
        let d = DMatrix::from_fn(kr.nrows, kr.ncols, |i, j| kr.get(i, j));
        let eig = d.symmetric_eigen();
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(min > 1e-3, "smallest eigenvalue {min}");
    }

    #[test]
    fn quadratic_form_matches_elementwise_integrals() {
        let m = layered(0.5);
        let k = assemble_stiffness(&m, &mats(), 0.5).unwrap();
        for seed in 0..5 {
            let s = random_state(&m, seed);
            let q = k.bilinear(&s.values, &s.values);
            let b = energy_breakdown(&m, &mats(), 0.5, &s, &vec![0.0; m.dof_count()], &[], 1);
            let sum = b.elastic_a + b.elastic_b + b.elastic_matrix + b.elastic_inclusions[0];
            assert!((q - sum).abs() <= 1e-12 * q.abs());
        }
    }

    #[test]
    fn coercive_on_clamped_states() {
        let eps = 0.5;
        let m = layered(eps);
        let k = assemble_stiffness(&m, &mats(), eps).unwrap();
        let s_form = assemble_strain_form(&m, eps);
        let map = mesh_dof_map(&m, LateralCondition::Free).unwrap();
        let alpha = mats().alpha_bar();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let ur: Vec<f64> = (0..map.n_free).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = map.expand(&ur);
            assert!(k.bilinear(&u, &u) >= alpha * s_form.bilinear(&u, &u) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn constant_body_force_gives_lumped_volumes() {
        let g = CellGeometry::homogeneous();
        let d = tile_layer(&g, [1.0, 1.0], 1.0, 0.5).unwrap();
        let m = mesh_assembly(&d, &g, 2, 2, 2.0).unwrap();
        let loads = Loads { f: VectorExpr::constant([0.0, 0.0, -1.0]), ..Default::default() };
        let rhs = assemble_load(&m, &loads, 0.5).unwrap();
        let mut vol = vec![0.0; m.node_count()];
        for e in 0..m.elements.len() {
            let s = m.element_size(e);
            for &n in &m.elements[e].nodes {
                vol[n] += s[0] * s[1] * s[2] / 8.0;
            }
        }
        for n in 0..m.node_count() {
            assert_eq!(rhs[3 * n], 0.0);
            assert!((rhs[3 * n + 2] + vol[n]).abs() < 1e-15);
        }
        assert!(assemble_load(&m, &Loads::default(), 0.5).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn inclusion_force_total_is_eps_independent() {
        let c = [0.5, -2.0, 1.0];
        let loads = Loads { inclusion_forces: vec![VectorExpr::constant(c)], ..Default::default() };
        let g = inclusion_cell();
        let vol_y1 = g.inclusions[0].volume();
        for eps in [0.5, 0.25] {
            let m = layered(eps);
            let rhs = assemble_load(&m, &loads, eps).unwrap();
            for comp in 0..3 {
                let total: f64 = (0..m.node_count()).map(|n| rhs[3 * n + comp]).sum();
                // (1/eps) |Omega^1_eps| c = |omega x Y^1| c
                assert!((total - vol_y1 * c[comp]).abs() < 1e-13);
            }
        }
        let bad = Loads { inclusion_forces: vec![VectorExpr::zero(), VectorExpr::zero()], ..Default::default() };
        assert!(assemble_load(&layered(0.5), &bad, 0.5).is_err());
    }

    #[test]
    fn breakdown_of_a_sliding_inclusion() {
        // inclusion translated along e1: faces normal to e2, e3 slide, the +e1 face opens
        let g = inclusion_cell();
        let m = mesh_cell(&g, 4).unwrap();
        let mut s = FieldState::zeros(&m);
        for el in m.elements.iter().filter(|e| matches!(e.region, Region::Inclusion(_))) {
            for &n in &el.nodes {
                s.set_node(n, [1.0, 0.0, 0.0]);
            }
        }
        let ones = vec![1.0; 4 * m.facets.len()];
        let b = energy_breakdown(&m, &mats(), 1.0, &s, &vec![0.0; m.dof_count()], &ones, 1);
        assert!((b.friction[1] - 1.0).abs() < 1e-15);
        assert!((b.eta - 1.25).abs() < 1e-15);
        assert!(b.xi < 1e-14);
        assert!((b.total - 1.0).abs() < 1e-15);
        let z = energy_breakdown(&m, &mats(), 1.0, &FieldState::zeros(&m), &vec![0.0; m.dof_count()], &ones, 1);
        assert_eq!((z.total, z.m_value, z.e_value, z.xi, z.eta), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn measure_inequalities_hold(seed in 0u64..10_000, scale in 1e-4f64..1e3) {
            let m = layered(0.5);
            let mut s = random_state(&m, seed);
            s.values.iter_mut().for_each(|v| *v *= scale);
            let b = energy_breakdown(&m, &mats(), 0.5, &s, &vec![0.0; m.dof_count()], &[], 1);
            prop_assert!(b.m_value <= b.e_value.sqrt() + b.e_value);
            prop_assert!(b.e_value <= b.m_value * b.m_value + b.m_value);
            prop_assert!(b.e_value >= 0.0);
        }
    }
}
