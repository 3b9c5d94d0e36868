//! Optimality certificates for a computed contact state.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ContactProblem;
use crate::error::{Error, Result};
use crate::mesh::FieldState;
use crate::sparse::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct KktResiduals {
    pub feasibility: f64,
    pub sign_n: f64,
    pub comp_n: f64,
    pub comp_t: f64,
    pub stick: usize,
    pub slip: usize,
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Sign, complementarity and Tresca conditions at every contact point.
///
/// Normal quantities are relative to (traction scale) x (length scale);
/// tangential ones relative to the local friction bound. A point with
/// |[u_tau]| <= stick_tol * (length scale) is classified as stick.
pub fn kkt_residuals(problem: &ContactProblem, state: &FieldState, tractions: &[[f64; 3]], stick_tol: f64) -> KktResiduals {
    let mut out = KktResiduals { feasibility: problem.violation(state), ..Default::default() };
    let gap_scale = problem.points.iter().fold(0.0f64, |m, p| m.max(p.gap));
    let len_scale = state.max_abs().max(gap_scale);
    let sigma_scale = tractions.iter().fold(0.0f64, |m, t| m.max(norm3(*t)));
    for (p, pt) in problem.points.iter().enumerate() {
        let (jn, jt) = pt.split(problem.point_jump(state, p));
        let (sn, st) = pt.split(tractions[p]);
        if sigma_scale > 0.0 {
            out.sign_n = out.sign_n.max(sn.max(0.0) / sigma_scale);
            if len_scale > 0.0 {
                out.comp_n = out.comp_n.max((sn * (jn - pt.gap)).abs() / (sigma_scale * len_scale));
            }
        }
        let slip = norm3(jt);
        let viol = if slip <= stick_tol * len_scale {
            out.stick += 1;
            (norm3(st) - pt.friction).max(0.0) / pt.friction
        } else {
            out.slip += 1;
            let d = [st[0] + pt.friction * jt[0] / slip, st[1] + pt.friction * jt[1] / slip, st[2] + pt.friction * jt[2] / slip];
            norm3(d) / pt.friction
        };
        out.comp_t = out.comp_t.max(viol);
    }
    out
}

/// Random states near `around` that satisfy every gap constraint.
pub fn sample_feasible(problem: &ContactProblem, around: &FieldState, count: usize, seed: u64) -> Vec<FieldState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = problem.dofs.restrict(&around.values);
    let scale = base.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let n = base.len();
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let amp = scale * [1.0, 1e-1, 1e-3, 1e-6][s % 4];
        let mut v = base.clone();
        match s % 3 {
            0 => v.iter_mut().for_each(|x| *x += amp * rng.random_range(-1.0..1.0)),
            1 => {
                for _ in 0..(n / 20).max(1) {
                    let i = rng.random_range(0..n.max(1));
                    if i < n {
                        v[i] += amp * rng.random_range(-1.0..1.0);
                    }
                }
            }
            _ => {
                // move the two sides of a few contact points apart or together
                for _ in 0..problem.points.len().div_ceil(10).max(1) {
                    if problem.points.is_empty() {
                        break;
                    }
                    let pt = problem.points[rng.random_range(0..problem.points.len())];
                    for c in 0..3 {
                        if let crate::dofs::DofSlot::Free(i) = problem.dofs.slots[3 * pt.plus + c] {
                            v[i] += amp * rng.random_range(-1.0..1.0);
                        }
                    }
                }
            }
        }
        problem.make_feasible(&mut v);
        out.push(problem.expand(&v));
    }
    out
}

/// Smallest normalized value of a(u, v - u) + Psi(v) - Psi(u) - <f, v - u>
/// over the candidates, divided by |v - u| |f|.
pub fn vi_residual(problem: &ContactProblem, u: &FieldState, candidates: &[FieldState]) -> Result<f64> {
    let ur = problem.dofs.restrict(&u.values);
    let tol = 1e-9 * u.max_abs().max(1e-300);
    let viol = problem.violation(u);
    if viol > tol {
        return Err(Error::Infeasible(format!("gap violated by {viol:.3e}")));
    }
    let grad: Vec<f64> = problem.k_red.mul_vec(&ur).iter().zip(&problem.f_red).map(|(a, b)| a - b).collect();
    let psi_u = problem.friction_of(&problem.jumps_reduced(&ur));
    let f_norm = norm2(&problem.f_red);
    let data = if f_norm > 0.0 { f_norm } else { 1.0 };
    let mut worst = 0.0f64;
    for v in candidates {
        let vr = problem.dofs.restrict(&v.values);
        let cv = problem.violation(v);
        if cv > 1e-9 * v.max_abs().max(1e-300) {
            return Err(Error::Infeasible(format!("candidate violates a gap by {cv:.3e}")));
        }
        let d: Vec<f64> = vr.iter().zip(&ur).map(|(a, b)| a - b).collect();
        let dn = norm2(&d);
        if dn == 0.0 {
            continue;
        }
        let r = dot(&grad, &d) + problem.friction_of(&problem.jumps_reduced(&vr)) - psi_u;
        worst = worst.min(r / (dn * data));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BoundReport {
    pub energy: f64,
    pub xi: f64,
    pub eta: f64,
    pub m_value: f64,
    pub data: f64,
    pub ratio: f64,
    /// data * max_k 1/M^k (k >= 1) with unit constant; the a-priori bound
    /// is guaranteed when this is at most 1/2.
    pub smallness: f64,
}

/// M(u) = xi + eta against the data combination of the a-priori bound
/// (Tresca: a^k = 0).
pub fn bound_check(problem: &ContactProblem, state: &FieldState) -> BoundReport {
    let xi = problem.strain_form.bilinear(&state.values, &state.values).max(0.0).sqrt();
    let mut eta = 0.0;
    for (p, pt) in problem.points.iter().enumerate() {
        if pt.crack == 0 {
            continue;
        }
        let (jn, jt) = pt.split(problem.point_jump(state, p));
        eta += pt.weight * (jn.max(0.0) + norm3(jt));
    }
    let data = problem.norms.combination();
    let m_value = xi + eta;
    let ratio = if m_value == 0.0 {
        0.0
    } else if data > 0.0 {
        m_value / data
    } else {
        f64::INFINITY
    };
    let inv_m = problem.friction_lower.iter().skip(1).fold(0.0f64, |m, v| m.max(1.0 / v));
    BoundReport { energy: problem.energy(state), xi, eta, m_value, data, ratio, smallness: data * inv_m }
}
