//! Two blocks coupled across Sigma by the effective interface matrix H.

use serde::{Deserialize, Serialize};

use super::correctors::galerkin_residual;
use crate::assembly::{assemble_load, assemble_stiffness, Loads, Materials};
use crate::dofs::{mesh_dof_map, LateralCondition};
use crate::error::{Error, Result};
use crate::linsolve::Cholesky;
use crate::mesh::{FieldState, HexMesh};
use crate::sparse::{dot, CsrMatrix, TripletBuilder};

/// Lumped (trapezoidal) weights of the interface node pairs of a block mesh,
/// in the order of `boundary.interface_pairs`.
pub fn sigma_weights(blocks: &HexMesh) -> Vec<f64> {
    let half = |v: &[f64]| -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                let lo = if i == 0 { v[0] } else { 0.5 * (v[i - 1] + v[i]) };
                let hi = if i + 1 == v.len() { v[i] } else { 0.5 * (v[i] + v[i + 1]) };
                hi - lo
            })
            .collect()
    };
    let (wx, wy) = (half(&blocks.grid.x), half(&blocks.grid.y));
    let mut out = Vec::with_capacity(wx.len() * wy.len());
    for b in &wy {
        for a in &wx {
            out.push(a * b);
        }
    }
    out
}

/// Adds sum_g w_g (u^a_g - u^b_g) . H (v^a_g - v^b_g) to the stiffness.
pub fn interface_coupling(blocks: &HexMesh, h: &[[f64; 3]; 3]) -> Result<CsrMatrix> {
    let pairs = &blocks.boundary.interface_pairs;
    let w = sigma_weights(blocks);
    if pairs.len() != w.len() {
        return Err(Error::InvalidDomain("interface pairs do not match the block grid".into()));
    }
    let n = blocks.dof_count();
    let mut t = TripletBuilder::with_capacity(n, n, 36 * pairs.len());
    for (&(b, a), wg) in pairs.iter().zip(&w) {
        for r in 0..3 {
            for c in 0..3 {
                let v = wg * h[r][c];
                t.push(3 * a + r, 3 * a + c, v);
                t.push(3 * b + r, 3 * b + c, v);
                t.push(3 * a + r, 3 * b + c, -v);
                t.push(3 * b + r, 3 * a + c, -v);
            }
        }
    }
    Ok(t.build())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSolution {
    pub state: FieldState,
    /// Minimum of 1/2 a(u, u) + 1/2 int H [u] . [u] - <f, u>.
    pub m_lin: f64,
    /// u^a - u^b at each interface pair.
    pub jumps: Vec<[f64; 3]>,
    pub residual: f64,
}

pub fn solve_transmission(
    blocks: &HexMesh,
    materials: &Materials,
    h: &[[f64; 3]; 3],
    loads: &Loads,
    lateral: LateralCondition,
) -> Result<TransmissionSolution> {
    if !loads.inclusion_forces.is_empty() {
        return Err(Error::InvalidLoad("the transmission problem carries no inclusion forces".into()));
    }
    if blocks.boundary.gamma.is_empty() {
        return Err(Error::Singular("no clamped boundary".into()));
    }
    let k = assemble_stiffness(blocks, materials, 1.0)?.add_scaled(1.0, &interface_coupling(blocks, h)?);
    let f = assemble_load(blocks, loads, 1.0)?;
    let dofs = mesh_dof_map(blocks, lateral)?;
    let kr = dofs.reduce_matrix(&k);
    let fr = dofs.reduce_rhs(&k, &f);
    let chol = Cholesky::factor(&kr).map_err(|e| Error::Singular(format!("transmission problem: {e}")))?;
    let x = chol.solve(&fr);
    let residual = galerkin_residual(&kr, &x, &fr);
    let state = FieldState { values: dofs.expand(&x) };
    let m_lin = 0.5 * k.bilinear(&state.values, &state.values) - dot(&f, &state.values);
    let jumps = blocks
        .boundary
        .interface_pairs
        .iter()
        .map(|&(b, a)| {
            let (ua, ub) = (state.node(a), state.node(b));
            [ua[0] - ub[0], ua[1] - ub[1], ua[2] - ub[2]]
        })
        .collect();
    Ok(TransmissionSolution { state, m_lin, jumps, residual })
}
