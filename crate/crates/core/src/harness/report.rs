//! Report types and their JSON / CSV emission.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::korn::KornEstimate;
use super::runs::LimitMethod;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsEntry {
    pub eps: f64,
    /// Free dofs after constraints.
    pub dofs: usize,
    pub contact_points: usize,
    pub m_eps: f64,
    /// |m_eps - m|.
    pub gap: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub bound_ratio: f64,
    pub smallness: f64,
    pub vi_residual: f64,
    pub comp_n: f64,
    pub comp_t: f64,
    pub feasibility: f64,
    pub glued_m: Option<f64>,
    pub glued_rel_diff: Option<f64>,
    /// Wall time; kept out of the JSON so repeated runs compare byte for byte.
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEntry {
    pub method: LimitMethod,
    pub m: f64,
    #[serde(rename = "H")]
    pub h: Option<[[f64; 3]; 3]>,
    pub dofs: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ConvergenceReport {
    /// Ordered as the eps sequence (decreasing eps).
    pub entries: Vec<EpsEntry>,
    pub limit: Option<LimitEntry>,
    /// Whether |m_eps - m| strictly decreases along the sequence.
    pub monotone: Option<bool>,
    pub korn: Vec<KornEstimate>,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(format!("report serialization: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("report parse: {e}")))
    }

    /// One row per eps.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["eps", "dofs", "m_eps", "gap", "iterations", "converged", "bound_ratio", "glued_m", "runtime_s"]).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for e in &self.entries {
            w.write_record([
                format!("{}", e.eps),
                e.dofs.to_string(),
                format!("{:e}", e.m_eps),
                opt(e.gap),
                e.iterations.to_string(),
                e.converged.to_string(),
                format!("{:e}", e.bound_ratio),
                opt(e.glued_m),
                format!("{:.3}", e.runtime_s),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv: {e}")))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), msg: e.to_string() })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

/// Writes the JSON report and, if requested, the CSV table.
pub fn emit(report: &ConvergenceReport, json: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    if let Some(p) = json {
        write_file(p, &report.to_json()?)?;
    }
    if let Some(p) = csv {
        write_file(p, &report.to_csv()?)?;
    }
    Ok(())
}

/// 3 x 3 matrix as CSV.
pub fn matrix_csv(h: &[[f64; 3]; 3]) -> String {
    h.iter().map(|r| r.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")).collect::<Vec<_>>().join("\n") + "\n"
}
