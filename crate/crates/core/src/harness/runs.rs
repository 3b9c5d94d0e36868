//! Building and solving the configured problems.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{exact_cells, ContactMode, ExperimentConfig};
use super::korn::{korn_probe, KornEstimate, KornSpace};
use super::report::{Check, ConvergenceReport, EpsEntry, LimitEntry};
use crate::assembly::{energy_breakdown, EnergyBreakdown};
use crate::contact::{minimize, ContactData, ContactProblem, SolveReport};
use crate::error::{Error, Result};
use crate::geometry::{build_unit_cell, tile_layer, CellGeometry};
use crate::homogenize::{
    effective_h, solve_correctors, solve_transmission, solve_unfolded_limit, EffectiveInterface, LimitProblem, TransmissionSolution,
};
use crate::mesh::{mesh_assembly, mesh_blocks, mesh_cell, FieldState, HexMesh, Region};

pub fn build_cell(cfg: &ExperimentConfig) -> Result<CellGeometry> {
    build_unit_cell(&cfg.geometry.cell_spec())
}

fn apply_mode(mesh: HexMesh, mode: ContactMode) -> HexMesh {
    match mode {
        ContactMode::Contact => mesh,
        ContactMode::Glued => mesh.glue_inclusions(),
        ContactMode::Holes => mesh.without_regions(|r| matches!(r, Region::Inclusion(_))),
    }
}

/// Cell mesh with the configured treatment of the inclusions.
pub fn cell_template(cfg: &ExperimentConfig, cell: &CellGeometry, n: usize) -> Result<HexMesh> {
    Ok(apply_mode(mesh_cell(cell, n)?, cfg.contact.mode))
}

/// Mesh of the layered domain at thickness eps.
pub fn eps_mesh(cfg: &ExperimentConfig, cell: &CellGeometry, eps: f64) -> Result<HexMesh> {
    let g = &cfg.geometry;
    let mut d = tile_layer(cell, g.omega, g.l, eps)?;
    d.gamma = g.gamma.clone();
    let mesh = mesh_assembly(&d, cell, cfg.n_cell_for(eps), cfg.mesh.n_block, cfg.mesh.ratio)?;
    Ok(apply_mode(mesh, cfg.contact.mode))
}

/// One solve of the fixed-eps problem.
#[derive(Debug, Clone)]
pub struct EpsRun {
    pub eps: f64,
    pub mesh: HexMesh,
    pub problem: ContactProblem,
    pub state: FieldState,
    pub report: SolveReport,
    pub breakdown: EnergyBreakdown,
    /// Minimum energy of the same mesh with every crack glued.
    pub glued_m: Option<f64>,
    pub runtime_s: f64,
}

pub fn solve_eps(cfg: &ExperimentConfig, cell: &CellGeometry, eps: f64, glued: bool) -> Result<EpsRun> {
    let start = Instant::now();
    let mesh = eps_mesh(cfg, cell, eps)?;
    let problem = ContactProblem::assemble(&mesh, &cfg.materials, &cfg.loads, &cfg.contact.data(), cfg.geometry.lateral)?;
    let (state, report) = minimize(&problem, &cfg.solver)?;
    let breakdown = energy_breakdown(&mesh, &cfg.materials, eps, &state, &problem.load, &problem.facet_data.friction, cell.inclusions.len());
    let glued_m = if glued {
        let gm = mesh.glue_all();
        let gp = ContactProblem::assemble(&gm, &cfg.materials, &cfg.loads, &ContactData::default(), cfg.geometry.lateral)?;
        let opts = crate::contact::SolverOptions { vi_samples: 0, ..cfg.solver.clone() };
        Some(minimize(&gp, &opts)?.1.m_eps)
    } else {
        None
    };
    Ok(EpsRun { eps, mesh, problem, state, report, breakdown, glued_m, runtime_s: start.elapsed().as_secs_f64() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    /// Blocks coupled through H (no contact left in the cell).
    Transmission,
    /// The unfolded problem on block grid x cell mesh, with contact.
    Unfolded,
}

#[derive(Debug, Clone)]
pub struct LimitRun {
    pub method: LimitMethod,
    pub m: f64,
    pub h: Option<EffectiveInterface>,
    pub report: Option<SolveReport>,
    pub blocks: HexMesh,
    /// State on `blocks` (transmission) or on the limit mesh (unfolded).
    pub state: FieldState,
    pub mesh: HexMesh,
    pub dofs: usize,
    pub transmission: Option<TransmissionSolution>,
    pub problem: Option<ContactProblem>,
}

fn finest_eps(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.experiment.eps_sequence.last().copied().or(cfg.geometry.eps).ok_or_else(|| Error::Config("no eps to size the limit grid".into()))
}

pub fn solve_limit(cfg: &ExperimentConfig, cell: &CellGeometry) -> Result<LimitRun> {
    let g = &cfg.geometry;
    let fine = finest_eps(cfg)?;
    let n_cell = cfg.n_cell_for(fine);
    let template = cell_template(cfg, cell, n_cell)?;
    let cells = [exact_cells(g.omega[0], fine).unwrap_or(1), exact_cells(g.omega[1], fine).unwrap_or(1)];
    if template.facets.is_empty() {
        let nxy = cfg.mesh.limit_nxy.unwrap_or([cells[0] * n_cell, cells[1] * n_cell]);
        let blocks = mesh_blocks(g.omega, g.l, nxy, cfg.mesh.n_block, cfg.mesh.ratio, &g.gamma)?;
        let set = solve_correctors(&template, &cfg.materials)?;
        let h = effective_h(&set, &cfg.materials)?;
        let sol = solve_transmission(&blocks, &cfg.materials, &h.h, &cfg.loads, g.lateral)?;
        let dofs = blocks.dof_count();
        Ok(LimitRun {
            method: LimitMethod::Transmission,
            m: sol.m_lin,
            h: Some(h),
            report: None,
            mesh: blocks.clone(),
            blocks,
            state: sol.state.clone(),
            dofs,
            transmission: Some(sol),
            problem: None,
        })
    } else {
        let nxy = cfg.mesh.limit_nxy.unwrap_or(cells);
        let blocks = mesh_blocks(g.omega, g.l, nxy, cfg.mesh.n_block, cfg.mesh.ratio, &g.gamma)?;
        let problem = LimitProblem::assemble(&blocks, &template, cell, &cfg.materials, &cfg.loads, &cfg.contact.data(), g.lateral)?;
        let (state, report) = solve_unfolded_limit(&problem, &cfg.solver)?;
        Ok(LimitRun {
            method: LimitMethod::Unfolded,
            m: state.m,
            h: None,
            dofs: problem.contact.n_free(),
            report: Some(report),
            mesh: problem.limit.mesh,
            blocks,
            state: state.full,
            transmission: None,
            problem: Some(problem.contact),
        })
    }
}

/// Clamped Korn probe on the perforated domain (inclusions removed) at thickness eps.
pub fn korn_at(cfg: &ExperimentConfig, cell: &CellGeometry, eps: f64, space: KornSpace) -> Result<KornEstimate> {
    let g = &cfg.geometry;
    let mut d = tile_layer(cell, g.omega, g.l, eps)?;
    d.gamma = g.gamma.clone();
    let mesh = mesh_assembly(&d, cell, cfg.n_cell_for(eps), cfg.mesh.n_block, cfg.mesh.ratio)?.without_regions(|r| matches!(r, Region::Inclusion(_)));
    korn_probe(&mesh, eps, space, &cfg.experiment.korn)
}

fn entry(run: &EpsRun) -> EpsEntry {
    let r = &run.report;
    EpsEntry {
        eps: run.eps,
        dofs: run.problem.n_free(),
        contact_points: run.problem.points.len(),
        m_eps: r.m_eps,
        gap: None,
        iterations: r.iterations,
        converged: r.converged,
        bound_ratio: r.bound_ratio,
        smallness: r.smallness,
        vi_residual: r.vi_residual,
        comp_n: r.comp_n,
        comp_t: r.comp_t,
        feasibility: r.feasibility,
        glued_m: run.glued_m,
        glued_rel_diff: run.glued_m.map(|g| (r.m_eps - g).abs() / g.abs().max(f64::MIN_POSITIVE)),
        runtime_s: run.runtime_s,
    }
}

/// Solves every eps of the sequence and the limit problem, then evaluates
/// the enabled checks. A failed solve stops the study; the partial report
/// carries the error.
pub fn run_convergence(cfg: &ExperimentConfig) -> ConvergenceReport {
    let mut report = ConvergenceReport::default();
    let cell = match build_cell(cfg) {
        Ok(c) => c,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let runs: Vec<Result<EpsRun>> =
        cfg.experiment.eps_sequence.par_iter().map(|&eps| solve_eps(cfg, &cell, eps, cfg.experiment.compare_glued)).collect();
    for (k, r) in runs.into_iter().enumerate() {
        match r {
            Ok(run) => {
                dump_state(cfg, &format!("eps_{k}.vtk"), &run.mesh, &run.state, &format!("eps = {}", run.eps));
                report.entries.push(entry(&run));
            }
            Err(e) => {
                report.error = Some(e.to_string());
                break;
            }
        }
    }
    if report.error.is_none() && !cfg.experiment.eps_sequence.is_empty() {
        match solve_limit(cfg, &cell) {
            Ok(l) => {
                dump_state(cfg, "limit.vtk", &l.mesh, &l.state, "limit");
                report.limit = Some(LimitEntry {
                    method: l.method,
                    m: l.m,
                    h: l.h.map(|h| h.h),
                    dofs: l.dofs,
                    converged: l.report.as_ref().is_none_or(|r| r.converged),
                });
                for e in &mut report.entries {
                    e.gap = Some((e.m_eps - l.m).abs());
                }
            }
            Err(e) => report.error = Some(format!("limit problem: {e}")),
        }
    }
    if report.error.is_none() {
        let korn: Vec<Result<KornEstimate>> = cfg.experiment.korn_eps.par_iter().map(|&eps| korn_at(cfg, &cell, eps, KornSpace::Clamped)).collect();
        for k in korn {
            match k {
                Ok(k) => report.korn.push(k),
                Err(e) => {
                    report.error = Some(format!("korn probe: {e}"));
                    break;
                }
            }
        }
    }
    evaluate_checks(cfg, &mut report);
    report
}

/// Writes a VTK file into `output.vtk` when `flags.dump_vtk` is set. Failures
/// are logged; they never change the report.
fn dump_state(cfg: &ExperimentConfig, name: &str, mesh: &HexMesh, state: &FieldState, title: &str) {
    if let (true, Some(dir)) = (cfg.flags.dump_vtk, &cfg.output.vtk) {
        if let Err(e) = crate::vtk::write_vtk(&dir.join(name), mesh, Some(state), title) {
            log::warn!("vtk output {name}: {e}");
        }
    }
}

pub fn evaluate_checks(cfg: &ExperimentConfig, report: &mut ConvergenceReport) {
    let x = &cfg.experiment;
    let mut checks = Vec::new();
    if let Some(e) = &report.error {
        checks.push(Check::new("completed", false, e.clone()));
    }
    if !report.entries.is_empty() {
        let bad: Vec<f64> = report.entries.iter().filter(|e| !e.converged).map(|e| e.eps).collect();
        checks.push(Check::new("solver_converged", bad.is_empty(), format!("not converged at eps {bad:?}")));
    }
    let gaps: Vec<f64> = report.entries.iter().filter_map(|e| e.gap).collect();
    report.monotone = (gaps.len() == report.entries.len() && gaps.len() >= 2).then(|| gaps.windows(2).all(|w| w[1] < w[0]));
    if x.require_monotone && gaps.len() >= 2 {
        checks.push(Check::new("gap_decreasing", report.monotone == Some(true), format!("gaps {gaps:?}")));
    }
    if x.compare_glued {
        let worst = report.entries.iter().filter_map(|e| e.glued_rel_diff).fold(0.0f64, f64::max);
        checks.push(Check::new("stick_matches_glued", worst <= x.glued_tol, format!("largest relative difference {worst:.3e}")));
    }
    let ratios: Vec<f64> = report.entries.iter().map(|e| e.bound_ratio).filter(|r| *r > 0.0).collect();
    if ratios.len() >= 2 {
        let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        checks.push(Check::new("bound_ratio_stable", spread < x.bound_spread, format!("spread {spread:.4}")));
    }
    let consts: Vec<f64> = report.korn.iter().filter_map(|k| k.constant).collect();
    if report.korn.len() >= 2 {
        let ok = consts.len() == report.korn.len();
        let spread =
            if ok { consts.iter().cloned().fold(0.0, f64::max) / consts.iter().cloned().fold(f64::INFINITY, f64::min) } else { f64::INFINITY };
        checks.push(Check::new("korn_stable", ok && spread < x.korn_spread, format!("spread {spread:.4}")));
    }
    report.checks = checks;
}
