//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::korn::KornOptions;
use crate::assembly::{Loads, Materials};
use crate::contact::{ContactData, SolverOptions};
use crate::dofs::LateralCondition;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{BlockFace, CellSpec, OpenCrack};

fn default_gamma() -> Vec<BlockFace> {
    vec![BlockFace::Bottom]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub omega: [f64; 2],
    #[serde(rename = "L", alias = "l")]
    pub l: f64,
    /// Layer thickness for single solves.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub inclusions: Vec<[f64; 6]>,
    #[serde(default)]
    pub open_cracks: Vec<OpenCrack>,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<BlockFace>,
    /// Anything but `free` needs `flags.test_bc`.
    #[serde(default)]
    pub lateral: LateralCondition,
}

impl GeometryConfig {
    pub fn cell_spec(&self) -> CellSpec {
        CellSpec { inclusions: self.inclusions.clone(), open_cracks: self.open_cracks.clone() }
    }
}

/// How the cracks of the cell enter the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    /// Unilateral contact with Tresca friction on every crack.
    #[default]
    Contact,
    /// Inclusions glued to the matrix; open cracks keep their contact law.
    Glued,
    /// Inclusions removed (perforated layer).
    Holes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    pub mode: ContactMode,
    pub gap: Vec<Expr>,
    pub friction: Vec<Expr>,
    pub friction_lower: Vec<f64>,
}

impl ContactConfig {
    pub fn data(&self) -> ContactData {
        ContactData { gap: self.gap.clone(), friction: self.friction.clone(), friction_lower: self.friction_lower.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Subdivisions per axis of the cell.
    pub n_cell: usize,
    /// Elements across each block.
    pub n_block: usize,
    /// Geometric grading of the block elements away from the layer.
    pub ratio: f64,
    /// Keep the layer element size of the finest eps for every eps (n_cell
    /// then applies to the finest eps and grows for the coarser ones).
    pub fixed_spacing: bool,
    /// Lateral elements of the limit block mesh; defaults to the layer grid
    /// of the finest eps (the cell grid for the unfolded problem).
    pub limit_nxy: Option<[usize; 2]>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { n_cell: 4, n_block: 3, ratio: 1.5, fixed_spacing: false, limit_nxy: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub eps_sequence: Vec<f64>,
    /// Layer thicknesses for the Korn probe.
    pub korn_eps: Vec<f64>,
    pub korn: KornOptions,
    /// Also solve the fully glued linear problem at every eps.
    pub compare_glued: bool,
    /// Relative tolerance of the contact-versus-glued comparison.
    pub glued_tol: f64,
    /// Largest allowed spread (max / min) of the a-priori bound ratio across eps.
    pub bound_spread: f64,
    /// Largest allowed spread of the Korn constants across eps.
    pub korn_spread: f64,
    pub require_monotone: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            eps_sequence: Vec::new(),
            korn_eps: Vec::new(),
            korn: KornOptions::default(),
            compare_glued: false,
            glued_tol: 1e-6,
            bound_spread: 2.0,
            korn_spread: 2.0,
            require_monotone: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Directory for VTK files of the final states.
    pub vtk: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// Allows lateral rollers or periodicity and a top traction.
    pub test_bc: bool,
    pub dump_vtk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub materials: Materials,
    #[serde(default)]
    pub loads: Loads,
    #[serde(default)]
    pub contact: ContactConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub flags: Flags,
}

/// Number of whole cells of size eps along a side of length w, if it tiles exactly.
pub fn exact_cells(w: f64, eps: f64) -> Option<usize> {
    let k = (w / eps).round();
    (k >= 1.0 && (k * eps - w).abs() <= 1e-9 * w.max(1.0)).then_some(k as usize)
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if ![g.omega[0], g.omega[1], g.l].iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Config("omega sides and L must be finite and positive".into()));
        }
        if g.gamma.is_empty() {
            return Err(Error::Config("gamma must name at least one face".into()));
        }
        if !self.flags.test_bc {
            if g.lateral != LateralCondition::Free {
                return Err(Error::Config("lateral rollers or periodicity need flags.test_bc = true".into()));
            }
            if self.loads.top_traction.is_some() {
                return Err(Error::Config("a top traction needs flags.test_bc = true".into()));
            }
        }
        if self.contact.mode == ContactMode::Holes && !self.loads.inclusion_forces.is_empty() {
            return Err(Error::Config("inclusion forces need the inclusions (mode = holes removes them)".into()));
        }
        self.materials.validate()?;
        let s = &self.solver;
        let positive = [s.energy_tol, s.feas_tol, s.dual_tol, s.rho_scale, s.pcg_tol, self.experiment.korn.tol];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(s.stick_tol >= 0.0 && s.stick_tol.is_finite()) {
            return Err(Error::Config("solver tolerances must be finite and positive".into()));
        }
        if s.rho.is_some_and(|r| !r.is_finite()) || !(s.relaxation > 0.0 && s.relaxation < 2.0) {
            return Err(Error::Config("rho must be finite and relaxation in (0, 2)".into()));
        }
        let x = &self.experiment;
        if [x.glued_tol, x.bound_spread, x.korn_spread].iter().any(|v| v.is_nan()) || self.contact.friction_lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("experiment tolerances and friction_lower must be numbers".into()));
        }
        let m = &self.mesh;
        if m.n_cell == 0 || m.n_block == 0 || !(m.ratio >= 1.0 && m.ratio.is_finite()) {
            return Err(Error::Config("n_cell, n_block must be positive and ratio >= 1".into()));
        }
        let check_eps = |eps: f64, what: &str| -> Result<()> {
            if !(eps > 0.0 && eps < g.l) {
                return Err(Error::Config(format!("{what}: eps = {eps} must lie in (0, L)")));
            }
            if exact_cells(g.omega[0], eps).is_none() || exact_cells(g.omega[1], eps).is_none() {
                return Err(Error::Config(format!("{what}: eps = {eps} does not tile omega = {:?} exactly", g.omega)));
            }
            Ok(())
        };
        if let Some(e) = g.eps {
            check_eps(e, "geometry.eps")?;
        }
        let seq = &self.experiment.eps_sequence;
        for &e in seq {
            check_eps(e, "eps_sequence")?;
        }
        if seq.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps_sequence must be strictly decreasing".into()));
        }
        for &e in &self.experiment.korn_eps {
            check_eps(e, "korn_eps")?;
        }
        if m.fixed_spacing {
            if let Some(&fine) = seq.last() {
                for &e in seq {
                    let k = e / fine;
                    if (k - k.round()).abs() > 1e-9 {
                        return Err(Error::Config(format!("fixed_spacing needs eps = {e} to be a multiple of the finest eps {fine}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Cell subdivisions used at layer thickness eps.
    pub fn n_cell_for(&self, eps: f64) -> usize {
        match (self.mesh.fixed_spacing, self.experiment.eps_sequence.last()) {
            (true, Some(&fine)) => self.mesh.n_cell * (eps / fine).round().max(1.0) as usize,
            _ => self.mesh.n_cell,
        }
    }

    /// The single layer thickness for one-off solves.
    pub fn single_eps(&self) -> Result<f64> {
        self.geometry
            .eps
            .or_else(|| self.experiment.eps_sequence.last().copied())
            .ok_or_else(|| Error::Config("no eps given (geometry.eps or experiment.eps_sequence)".into()))
    }
}
