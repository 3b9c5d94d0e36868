//! Unfolding of layer fields onto omega x Y by re-indexing cell copies.
//!
//! The layer mesh is made of eps-scaled copies of one cell mesh, so the
//! unfolded field at (xi, y) is exactly the nodal value at eps (xi + y). The
//! identity checks below evaluate both sides with the same quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{gauss_points, grad_at, map_point, shape_values, Tensor};
use crate::mesh::{FieldState, HexMesh, LayerLayout};

/// Values per (cell, template node) for volume fields or per
/// (cell, 4 * template facet + k) for crack traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedField {
    pub eps: f64,
    pub values: Vec<Vec<[f64; 3]>>,
}

/// The layer layout, rejected when elements or facets were removed after
/// tiling (its indices would no longer match).
fn layout(mesh: &HexMesh) -> Result<&LayerLayout> {
    let lay = mesh.layout.as_ref().ok_or_else(|| Error::InvalidDomain("field is not defined on a layer mesh".into()))?;
    let elements_ok = lay
        .cell_elements
        .iter()
        .enumerate()
        .all(|(c, els)| els.iter().enumerate().all(|(t, &e)| mesh.elements.get(e).is_some_and(|el| el.cell == Some(c) && el.local == Some(t))));
    let facets_ok = lay
        .cell_facets
        .iter()
        .enumerate()
        .all(|(c, fs)| fs.iter().enumerate().all(|(t, &f)| mesh.facets.get(f).is_some_and(|fa| fa.cell == Some(c) && fa.local == Some(t))));
    if !(elements_ok && facets_ok) {
        return Err(Error::InvalidDomain("layer layout does not match the mesh (regions removed or glued after tiling)".into()));
    }
    Ok(lay)
}

/// T_eps of a displacement field: inclusion entries read the inclusion copies.
pub fn unfold(mesh: &HexMesh, state: &FieldState) -> Result<UnfoldedField> {
    let lay = layout(mesh)?;
    let values = lay.cell_nodes.iter().map(|map| map.iter().map(|&n| state.node(n)).collect()).collect();
    Ok(UnfoldedField { eps: lay.eps, values })
}

/// T^bl of a trace given per facet node (`4 * facet + k`) on crack family `crack`.
/// Entries of other families are left at zero.
pub fn unfold_boundary(mesh: &HexMesh, trace: &[[f64; 3]], crack: usize) -> Result<UnfoldedField> {
    let lay = layout(mesh)?;
    let families = lay.template.facets.iter().map(|f| f.crack).max();
    if families.is_none_or(|m| crack > m) || !lay.template.facets.iter().any(|f| f.crack == crack) {
        return Err(Error::InvalidCell(format!("unknown crack id {crack}")));
    }
    let values = lay
        .cell_facets
        .iter()
        .map(|fs| {
            let mut out = vec![[0.0; 3]; 4 * fs.len()];
            for (t, &f) in fs.iter().enumerate() {
                if lay.template.facets[t].crack == crack {
                    for k in 0..4 {
                        out[4 * t + k] = trace[4 * f + k];
                    }
                }
            }
            out
        })
        .collect();
    Ok(UnfoldedField { eps: lay.eps, values })
}

/// Trace of a state on the plus (inclusion / upper) side of every facet.
pub fn plus_trace(mesh: &HexMesh, state: &FieldState) -> Vec<[f64; 3]> {
    mesh.facets.iter().flat_map(|f| f.plus.map(|n| state.node(n))).collect()
}

/// Residuals of the unfolding identities, each relative to the natural scale
/// of its two sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct IdentityResiduals {
    pub integral: f64,
    pub l2_norm: f64,
    pub gradient: f64,
    pub strain: f64,
    pub boundary_integral: f64,
    pub boundary_l1: f64,
    pub boundary_l2: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [self.integral, self.l2_norm, self.gradient, self.strain, self.boundary_integral, self.boundary_l1, self.boundary_l2]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Bilinear facet interpolation at the 2x2 Gauss points; returns
/// (sum w psi, sum w |psi|, sum w psi^2) per component, for unit weights
/// scaled by `area`.
fn facet_integrals(vals: &[[f64; 3]], area: f64) -> [[f64; 3]; 3] {
    const G: f64 = 0.577_350_269_189_625_8;
    let mut out = [[0.0; 3]; 3];
    // nodes listed counterclockwise: (-,-) (+,-) (+,+) (-,+)
    let s = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    for (p, q) in [(-G, -G), (G, -G), (G, G), (-G, G)] {
        let n: [f64; 4] = std::array::from_fn(|k| (1.0 + s[k][0] * p) * (1.0 + s[k][1] * q) / 4.0);
        for c in 0..3 {
            let v: f64 = (0..4).map(|k| n[k] * vals[k][c]).sum();
            out[0][c] += v * area / 4.0;
            out[1][c] += v.abs() * area / 4.0;
            out[2][c] += v * v * area / 4.0;
        }
    }
    out
}

/// Checks the volume identities on `state` and the boundary identities on its
/// plus-side trace over crack family `crack` (skipped when the cell has none).
pub fn check_identities(mesh: &HexMesh, state: &FieldState, crack: Option<usize>) -> Result<IdentityResiduals> {
    let lay = layout(mesh)?;
    let eps = lay.eps;
    let tmpl = &lay.template;
    let unf = unfold(mesh, state)?;
    let gp = gauss_points();
    let mut res = IdentityResiduals::default();

    // physical side and unfolded side, per component
    let (mut int_x, mut int_y, mut abs_x) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    let (mut sq_x, mut sq_y) = ([0.0; 3], [0.0; 3]);
    let (mut grad_err, mut grad_scale, mut strain_err) = (0.0f64, 0.0f64, 0.0f64);
    for (c, els) in lay.cell_elements.iter().enumerate() {
        for (t, &e) in els.iter().enumerate() {
            let (lo, hi) = mesh.element_box(e);
            let hx = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
            let hy = tmpl.element_size(t);
            let det_x = hx[0] * hx[1] * hx[2] / 8.0;
            let det_y = hy[0] * hy[1] * hy[2] / 8.0;
            let ux: [[f64; 3]; 8] = mesh.elements[e].nodes.map(|n| state.node(n));
            let uy: [[f64; 3]; 8] = tmpl.elements[t].nodes.map(|n| unf.values[c][n]);
            for r in gp {
                let n = shape_values(r);
                for comp in 0..3 {
                    let vx: f64 = (0..8).map(|a| n[a] * ux[a][comp]).sum();
                    let vy: f64 = (0..8).map(|a| n[a] * uy[a][comp]).sum();
                    int_x[comp] += vx * det_x;
                    abs_x[comp] += vx.abs() * det_x;
                    sq_x[comp] += vx * vx * det_x;
                    // omega x Y measure: eps^2 per cell in x', det_y in y
                    int_y[comp] += vy * eps * eps * det_y;
                    sq_y[comp] += vy * vy * eps * eps * det_y;
                }
                let gx = grad_at(hx, r, &ux);
                let gy = grad_at(hy, r, &uy);
                let sym = |g: &Tensor| -> Tensor { std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (g[i][j] + g[j][i]))) };
                let (ex, ey) = (sym(&gx), sym(&gy));
                for i in 0..3 {
                    for j in 0..3 {
                        grad_err = grad_err.max((gy[i][j] - eps * gx[i][j]).abs());
                        strain_err = strain_err.max((ey[i][j] - eps * ex[i][j]).abs());
                        grad_scale = grad_scale.max(gy[i][j].abs());
                    }
                }
            }
        }
    }
    for comp in 0..3 {
        res.integral = res.integral.max(rel(int_x[comp], eps * int_y[comp], abs_x[comp]));
        let (nx, ny) = (sq_x[comp].sqrt(), eps.sqrt() * sq_y[comp].sqrt());
        res.l2_norm = res.l2_norm.max(rel(nx, ny, nx.max(ny)));
    }
    let field_scale = state.max_abs().max(grad_scale);
    res.gradient = rel(grad_err, 0.0, field_scale);
    res.strain = rel(strain_err, 0.0, field_scale);

    if let Some(j) = crack {
        let trace = plus_trace(mesh, state);
        let bl = unfold_boundary(mesh, &trace, j)?;
        let (mut bx, mut by) = ([[0.0; 3]; 3], [[0.0; 3]; 3]);
        for (c, fs) in lay.cell_facets.iter().enumerate() {
            for (t, &f) in fs.iter().enumerate() {
                if tmpl.facets[t].crack != j {
                    continue;
                }
                let ix = facet_integrals(&trace[4 * f..4 * f + 4], mesh.facets[f].area);
                let iy = facet_integrals(&bl.values[c][4 * t..4 * t + 4], eps * eps * tmpl.facets[t].area);
                for q in 0..3 {
                    for comp in 0..3 {
                        bx[q][comp] += ix[q][comp];
                        by[q][comp] += iy[q][comp];
                    }
                }
            }
        }
        for comp in 0..3 {
            res.boundary_integral = res.boundary_integral.max(rel(bx[0][comp], by[0][comp], bx[1][comp]));
            res.boundary_l1 = res.boundary_l1.max(rel(bx[1][comp], by[1][comp], bx[1][comp]));
            let (nx, ny) = (bx[2][comp].sqrt(), by[2][comp].sqrt());
            res.boundary_l2 = res.boundary_l2.max(rel(nx, ny, nx.max(ny)));
        }
    }
    Ok(res)
}

/// Value of the unfolded field at the Gauss points of template element `t`
/// in cell `c` (used for L2 distances between unfolded fields).
pub fn unfolded_gauss_values(mesh: &HexMesh, field: &UnfoldedField, c: usize, t: usize) -> Result<[[f64; 3]; 8]> {
    let lay = layout(mesh)?;
    let nodes = lay.template.elements[t].nodes;
    Ok(gauss_points().map(|r| {
        let n = shape_values(r);
        let mut v = [0.0; 3];
        for a in 0..8 {
            for comp in 0..3 {
                v[comp] += n[a] * field.values[c][nodes[a]][comp];
            }
        }
        v
    }))
}

/// Physical position of the Gauss point `r` of template element `t` in cell `c`.
pub fn physical_point(mesh: &HexMesh, c: usize, t: usize, r: [f64; 3]) -> Result<[f64; 3]> {
    let lay = layout(mesh)?;
    let e = lay.cell_elements[c][t];
    let (lo, hi) = mesh.element_box(e);
    Ok(map_point(lo, [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]], r))
}
