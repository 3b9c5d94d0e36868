//! One-off reports behind the `cell`, `solve-eps`, `solve-limit`, `korn` and
//! `unfold-check` commands.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ContactMode, ExperimentConfig};
use super::korn::{KornEstimate, KornSpace};
use super::runs::{build_cell, cell_template, eps_mesh, korn_at, solve_eps, solve_limit, EpsRun, LimitMethod, LimitRun};
use crate::assembly::EnergyBreakdown;
use crate::contact::ContactProblem;
use crate::error::Result;
use crate::homogenize::{effective_h, sigma_weights, solve_correctors};
use crate::mesh::{FieldState, HexMesh};
use crate::sparse::dot;
use crate::unfolding::{check_identities, IdentityResiduals};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub vi: f64,
    pub feas: f64,
    pub comp_n: f64,
    pub comp_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveEpsReport {
    pub eps: f64,
    pub dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub m_eps: f64,
    pub residuals: Residuals,
    pub bound_ratio: f64,
    pub smallness: f64,
    pub stick_points: usize,
    pub slip_points: usize,
    pub energy_breakdown: EnergyBreakdown,
}

impl SolveEpsReport {
    pub fn from_run(run: &EpsRun) -> Self {
        let r = &run.report;
        Self {
            eps: run.eps,
            dofs: run.problem.n_free(),
            iterations: r.iterations,
            converged: r.converged,
            m_eps: r.m_eps,
            residuals: Residuals { vi: r.vi_residual, feas: r.feasibility, comp_n: r.comp_n, comp_t: r.comp_t },
            bound_ratio: r.bound_ratio,
            smallness: r.smallness,
            stick_points: r.stick_points,
            slip_points: r.slip_points,
            energy_breakdown: run.breakdown.clone(),
        }
    }
}

/// Solves at the single configured eps.
pub fn solve_eps_report(cfg: &ExperimentConfig) -> Result<(SolveEpsReport, EpsRun)> {
    let cell = build_cell(cfg)?;
    let run = solve_eps(cfg, &cell, cfg.single_eps()?, false)?;
    Ok((SolveEpsReport::from_run(&run), run))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSize {
    pub n: usize,
    pub nodes: usize,
    pub elements: usize,
    pub facets: usize,
}

impl MeshSize {
    fn of(mesh: &HexMesh, n: usize) -> Self {
        Self { n, nodes: mesh.nodes.len(), elements: mesh.elements.len(), facets: mesh.facets.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    #[serde(rename = "H")]
    pub h: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    pub positive_definite: bool,
    /// a(chi^i, chi^i) for i = 1, 2, 3.
    pub corrector_energies: [f64; 3],
    /// Largest relative Galerkin residual of the three corrector solves.
    pub corrector_residual: f64,
    pub mesh: MeshSize,
}

/// Correctors and H on the cell mesh (inclusions as configured; contact
/// surfaces are glued for the linear cell problem).
pub fn cell_report(cfg: &ExperimentConfig) -> Result<CellReport> {
    let cell = build_cell(cfg)?;
    let n = cfg.mesh.n_cell;
    let mesh = cell_template(cfg, &cell, n)?.glue_inclusions();
    let set = solve_correctors(&mesh, &cfg.materials)?;
    let eff = effective_h(&set, &cfg.materials)?;
    Ok(CellReport {
        h: eff.h,
        eigenvalues: eff.eigenvalues,
        positive_definite: eff.is_positive_definite(),
        corrector_energies: [eff.h[0][0], eff.h[1][1], eff.h[2][2]],
        corrector_residual: set.residuals.iter().cloned().fold(0.0, f64::max),
        mesh: MeshSize::of(&set.mesh, n),
    })
}

/// Energy split of a limit state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitBreakdown {
    /// Quadratic form of the blocks and cell copies (transmission: blocks only).
    pub elastic: f64,
    /// 1/2 sum w [u] . H [u] over the interface (transmission only).
    pub interface: f64,
    pub friction: f64,
    pub load_work: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub method: LimitMethod,
    pub m: f64,
    pub dofs: usize,
    #[serde(rename = "H")]
    pub h: Option<[[f64; 3]; 3]>,
    pub energy_breakdown: LimitBreakdown,
    pub residuals: LimitResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResiduals {
    /// Relative residual of the linear solve (transmission).
    pub linear: Option<f64>,
    pub contact: Option<Residuals>,
    pub converged: bool,
}

fn contact_split(problem: &ContactProblem, state: &FieldState) -> (f64, f64, f64, f64) {
    let u = &state.values;
    let elastic = 0.5 * dot(u, &problem.stiffness.mul_vec(u));
    let load_work = dot(&problem.load, u);
    let total = problem.energy(state);
    (elastic, total - elastic + load_work, load_work, total)
}

pub fn solve_limit_report(cfg: &ExperimentConfig) -> Result<(LimitReport, LimitRun)> {
    let cell = build_cell(cfg)?;
    let run = solve_limit(cfg, &cell)?;
    let (energy_breakdown, residuals) = match (&run.method, &run.transmission, &run.problem) {
        (LimitMethod::Transmission, Some(t), _) => {
            let h = run.h.as_ref().map(|h| h.h).unwrap_or_default();
            let w = sigma_weights(&run.blocks);
            let interface: f64 =
                t.jumps.iter().zip(&w).map(|(j, w)| 0.5 * w * (0..3).map(|a| (0..3).map(|b| j[a] * h[a][b] * j[b]).sum::<f64>()).sum::<f64>()).sum();
            // at the minimizer the load work is twice the negative energy
            let load_work = -2.0 * t.m_lin;
            (
                LimitBreakdown { elastic: -t.m_lin - interface, interface, friction: 0.0, load_work, total: t.m_lin },
                LimitResiduals { linear: Some(t.residual), contact: None, converged: true },
            )
        }
        (_, _, Some(p)) => {
            let (elastic, friction, load_work, total) = contact_split(p, &run.state);
            let r = run.report.as_ref().expect("unfolded limit carries a solver report");
            (
                LimitBreakdown { elastic, interface: 0.0, friction, load_work, total },
                LimitResiduals {
                    linear: None,
                    contact: Some(Residuals { vi: r.vi_residual, feas: r.feasibility, comp_n: r.comp_n, comp_t: r.comp_t }),
                    converged: r.converged,
                },
            )
        }
        _ => unreachable!("limit run without its solution"),
    };
    Ok((LimitReport { method: run.method, m: run.m, dofs: run.dofs, h: run.h.as_ref().map(|h| h.h), energy_breakdown, residuals }, run))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KornReport {
    pub space: KornSpace,
    pub estimates: Vec<KornEstimate>,
    /// max / min of the constants, when every estimate has one.
    pub spread: Option<f64>,
}

/// Korn probe at every `korn_eps` (or the single eps).
pub fn korn_report(cfg: &ExperimentConfig, space: KornSpace) -> Result<KornReport> {
    let cell = build_cell(cfg)?;
    let eps_list = if cfg.experiment.korn_eps.is_empty() { vec![cfg.single_eps()?] } else { cfg.experiment.korn_eps.clone() };
    let estimates = eps_list.iter().map(|&e| korn_at(cfg, &cell, e, space)).collect::<Result<Vec<_>>>()?;
    let consts: Vec<f64> = estimates.iter().filter_map(|k| k.constant).collect();
    let spread = (consts.len() == estimates.len() && !consts.is_empty())
        .then(|| consts.iter().cloned().fold(0.0, f64::max) / consts.iter().cloned().fold(f64::INFINITY, f64::min));
    Ok(KornReport { space, estimates, spread })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldRow {
    pub sample: usize,
    /// Crack family used for the boundary identities.
    pub crack: Option<usize>,
    pub residuals: IdentityResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnfoldCheckReport {
    pub eps: f64,
    pub rows: Vec<UnfoldRow>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Identity residuals of the unfolding operators on seeded random nodal
/// fields over the layered mesh.
pub fn unfold_check(cfg: &ExperimentConfig, samples: usize, tolerance: f64) -> Result<UnfoldCheckReport> {
    let cell = build_cell(cfg)?;
    let eps = cfg.single_eps()?;
    // the identities are about the tiling, so inclusions stay in whatever the contact mode
    let mut full = cfg.clone();
    full.contact.mode = ContactMode::Contact;
    let mesh = eps_mesh(&full, &cell, eps)?;
    let families: Vec<Option<usize>> = {
        let mut f: Vec<usize> = mesh.facets.iter().map(|f| f.crack).collect();
        f.sort_unstable();
        f.dedup();
        if f.is_empty() {
            vec![None]
        } else {
            f.into_iter().map(Some).collect()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    let mut rows = Vec::new();
    for sample in 0..samples {
        let state = FieldState { values: (0..mesh.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect() };
        for &crack in &families {
            rows.push(UnfoldRow { sample, crack, residuals: check_identities(&mesh, &state, crack)? });
        }
    }
    let max_residual = rows.iter().map(|r| r.residuals.max()).fold(0.0, f64::max);
    Ok(UnfoldCheckReport { eps, rows, max_residual, tolerance, passed: max_residual <= tolerance })
}
