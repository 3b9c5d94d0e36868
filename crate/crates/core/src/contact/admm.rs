//! Alternating-direction augmented Lagrangian for the contact problem.
//!
//! The jumps are split off into z = D u + c. The z-update is nodewise: the
//! normal part is clamped at the gap and the tangential part is shrunk by the
//! weighted friction bound. The u-update solves with K + rho D^T D, factored once.

use serde::{Deserialize, Serialize};

use super::diagnostics::{bound_check, kkt_residuals, sample_feasible, vi_residual};
use super::ContactProblem;
use crate::error::{Error, Result};
use crate::linsolve::{LinearSolverKind, PcgOptions, SpdSolver};
use crate::mesh::FieldState;
use crate::sparse::norm2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative energy change between iterations.
    pub energy_tol: f64,
    /// Jump-splitting residual relative to the displacement size.
    pub feas_tol: f64,
    /// Dual residual relative to the load.
    pub dual_tol: f64,
    pub max_iter: usize,
    /// Fixed penalty; when absent it is `rho_scale` times the mean stiffness
    /// diagonal over the dofs that enter a jump.
    pub rho: Option<f64>,
    pub rho_scale: f64,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    pub linear: LinearSolverKind,
    pub pcg_tol: f64,
    /// Random feasible samples for the variational inequality certificate.
    pub vi_samples: usize,
    pub seed: u64,
    /// Tangential jumps below this fraction of the displacement size count as stick.
    pub stick_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            energy_tol: 1e-9,
            feas_tol: 1e-10,
            dual_tol: 1e-10,
            max_iter: 50_000,
            rho: None,
            rho_scale: 1.0,
            relaxation: 1.0,
            linear: LinearSolverKind::Cholesky,
            pcg_tol: 1e-12,
            vi_samples: 200,
            seed: 7,
            stick_tol: 1e-8,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.energy_tol) || !positive(self.feas_tol) || !positive(self.dual_tol) || !positive(self.rho_scale) {
            return Err(Error::Config("solver tolerances and rho_scale must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::Config(format!("relaxation {} outside (0, 2)", self.relaxation)));
        }
        if self.rho.is_some_and(|r| !positive(r)) {
            return Err(Error::Config("rho must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub m_eps: f64,
    /// Lowest feasible energy seen up to each iteration. The returned state is
    /// the last iterate, whose energy `m_eps` agrees with the final entry to
    /// the solver tolerance.
    pub energy_history: Vec<f64>,
    pub vi_residual: f64,
    pub comp_n: f64,
    pub comp_t: f64,
    /// Largest positive normal traction relative to the traction scale.
    pub sign_n: f64,
    /// Largest gap violation of the returned state.
    pub feasibility: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub bound_ratio: f64,
    /// Data combination of the smallness condition with unit constant.
    pub smallness: f64,
    pub rho: f64,
    pub stick_points: usize,
    pub slip_points: usize,
    /// Traction vector per contact point, sigma = -y / weight.
    #[serde(skip)]
    pub tractions: Vec<[f64; 3]>,
}

fn shrink(v: [f64; 3], axis: usize, thr: f64) -> [f64; 3] {
    let mut t = v;
    t[axis] = 0.0;
    let n = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    if n <= thr {
        [0.0; 3]
    } else {
        let s = 1.0 - thr / n;
        [t[0] * s, t[1] * s, t[2] * s]
    }
}

fn auto_rho(problem: &ContactProblem) -> f64 {
    let diag = problem.k_red.diagonal();
    let mut touched = vec![false; problem.n_free()];
    for r in 0..problem.jump_op.nrows {
        for (c, _) in problem.jump_op.row(r) {
            touched[c] = true;
        }
    }
    let (sum, count) = diag.iter().zip(&touched).filter(|(_, t)| **t).fold((0.0, 0usize), |(s, n), (d, _)| (s + d, n + 1));
    if count == 0 {
        1.0
    } else {
        sum / count as f64
    }
}

/// Minimizer of the contact energy over the feasible set, started from zero.
pub fn minimize(problem: &ContactProblem, opts: &SolverOptions) -> Result<(FieldState, SolveReport)> {
    minimize_from(problem, opts, None)
}

/// As [`minimize`], started from the given state.
pub fn minimize_from(problem: &ContactProblem, opts: &SolverOptions, start: Option<&FieldState>) -> Result<(FieldState, SolveReport)> {
    opts.validate()?;
    let n = problem.n_free();
    let np = problem.points.len();
    let rho = opts.rho.unwrap_or_else(|| opts.rho_scale * auto_rho(problem));
    let d = &problem.jump_op;
    let dt = d.transpose();
    let system = if np == 0 { problem.k_red.clone() } else { problem.k_red.add_scaled(rho, &d.gram()) };
    let solver = SpdSolver::new(&system, opts.linear, PcgOptions { rel_tol: opts.pcg_tol, ..Default::default() }).map_err(|e| match e {
        Error::Singular(m) => Error::Singular(format!("stiffness is not coercive on the constrained space ({m})")),
        other => other,
    })?;

    let mut u = match start {
        Some(s) => problem.dofs.restrict(&s.values),
        None => vec![0.0; n],
    };
    let mut z = problem.jumps_reduced(&u);
    for (p, pt) in problem.points.iter().enumerate() {
        let zn = pt.sign * z[3 * p + pt.axis];
        if zn > pt.gap {
            z[3 * p + pt.axis] = pt.sign * pt.gap;
        }
    }
    let mut y = vec![0.0; 3 * np];
    let f_norm = norm2(&problem.f_red);
    let alpha = opts.relaxation;

    let mut last_u = u.clone();
    problem.make_feasible(&mut last_u);
    let mut last = problem.energy_reduced(&last_u);
    let mut best = last;
    let mut prev = last;
    let mut history = Vec::new();
    let mut report = SolveReport { rho, ..Default::default() };
    let mut rhs_jump = vec![0.0; 3 * np];

    for it in 1..=opts.max_iter.max(1) {
        for k in 0..3 * np {
            rhs_jump[k] = rho * (z[k] - problem.jump_offset[k]) - y[k];
        }
        let mut rhs = dt.mul_vec(&rhs_jump);
        for (r, f) in rhs.iter_mut().zip(&problem.f_red) {
            *r += f;
        }
        u = solver.solve(&rhs, Some(&u))?;
        let x = problem.jumps_reduced(&u);
        let mut z_new = vec![0.0; 3 * np];
        for (p, pt) in problem.points.iter().enumerate() {
            let i = 3 * p;
            let xh: [f64; 3] = std::array::from_fn(|c| alpha * x[i + c] + (1.0 - alpha) * z[i + c]);
            let v: [f64; 3] = std::array::from_fn(|c| xh[c] + y[i + c] / rho);
            let mut zp = shrink(v, pt.axis, pt.weight * pt.friction / rho);
            zp[pt.axis] = pt.sign * (pt.sign * v[pt.axis]).min(pt.gap);
            z_new[i..i + 3].copy_from_slice(&zp);
            for c in 0..3 {
                y[i + c] += rho * (xh[c] - zp[c]);
            }
        }
        let u_scale = u.iter().chain(&problem.jump_offset).fold(0.0f64, |m, v| m.max(v.abs()));
        let primal = x.iter().zip(&z_new).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let dz: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| rho * (a - b)).collect();
        let dual = norm2(&dt.mul_vec(&dz));
        z = z_new;
        report.primal_residual = if u_scale > 0.0 { primal / u_scale } else { primal };
        report.dual_residual = if f_norm > 0.0 { dual / f_norm } else { dual };

        let mut uf = u.clone();
        problem.make_feasible(&mut uf);
        let e = problem.energy_reduced(&uf);
        if !e.is_finite() {
            return Err(Error::Diverged(format!("energy became {e} at iteration {it}; check the penalty scaling")));
        }
        best = best.min(e);
        history.push(best);
        last_u = uf;
        last = e;
        let rel = (e - prev).abs() / e.abs().max(f64::MIN_POSITIVE);
        prev = e;
        report.iterations = it;
        if it >= 2 && rel <= opts.energy_tol && report.primal_residual <= opts.feas_tol && report.dual_residual <= opts.dual_tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!(
            "contact solver stopped after {} iterations (primal {:.2e}, dual {:.2e})",
            report.iterations,
            report.primal_residual,
            report.dual_residual
        );
    }

    let state = problem.expand(&last_u);
    report.m_eps = last;
    report.energy_history = history;
    report.tractions = problem.points.iter().enumerate().map(|(p, pt)| std::array::from_fn(|c| -y[3 * p + c] / pt.weight)).collect();
    let kkt = kkt_residuals(problem, &state, &report.tractions, opts.stick_tol);
    report.feasibility = kkt.feasibility;
    report.comp_n = kkt.comp_n;
    report.comp_t = kkt.comp_t;
    report.sign_n = kkt.sign_n;
    report.stick_points = kkt.stick;
    report.slip_points = kkt.slip;
    let samples = sample_feasible(problem, &state, opts.vi_samples, opts.seed);
    report.vi_residual = vi_residual(problem, &state, &samples)?;
    let bound = bound_check(problem, &state);
    report.bound_ratio = bound.ratio;
    report.smallness = bound.smallness;
    Ok((state, report))
}
