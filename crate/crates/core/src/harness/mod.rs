//! Configured experiments: single solves, the eps sequence against the
//! limit problem, Korn probes and their reports.

pub mod config;
pub mod korn;
pub mod report;
pub mod runs;
pub mod single;

#[cfg(test)]
mod tests;

pub use config::{exact_cells, ContactMode, ExperimentConfig};
pub use korn::{korn_probe, KornEstimate, KornOptions, KornSpace};
pub use report::{emit, Check, ConvergenceReport, EpsEntry, LimitEntry};
pub use runs::{build_cell, cell_template, eps_mesh, korn_at, run_convergence, solve_eps, solve_limit, EpsRun, LimitMethod, LimitRun};
pub use single::{
    cell_report, korn_report, solve_eps_report, solve_limit_report, unfold_check, CellReport, KornReport, LimitReport, SolveEpsReport,
    UnfoldCheckReport,
};
