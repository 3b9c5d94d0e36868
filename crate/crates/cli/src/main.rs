use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use layerhom::harness::report::{matrix_csv, write_file};
use layerhom::harness::{
    build_cell, cell_report, cell_template, emit, eps_mesh, korn_report, run_convergence, solve_eps_report, solve_limit_report, unfold_check,
    ExperimentConfig, KornSpace,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "layerhom", version, about = "Thin periodic layer with frictional contact between two elastic blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Report file; defaults to `output.json` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report as JSON on stdout instead of a summary.
    #[arg(long)]
    json: bool,
    /// Write the mesh of the run as legacy VTK.
    #[arg(long, value_name = "PATH")]
    dump_mesh: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Cell correctors and the effective interface matrix H.
    Cell {
        #[command(flatten)]
        common: Common,
    },
    /// Contact problem at one layer thickness.
    SolveEps {
        #[command(flatten)]
        common: Common,
        /// Final displacement as legacy VTK.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// The limit problem.
    SolveLimit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// m_eps along the eps sequence against the limit m.
    Converge {
        #[command(flatten)]
        common: Common,
        /// CSV table; defaults to `output.csv` of the config.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Empirical Korn constants of the perforated layer.
    Korn {
        #[command(flatten)]
        common: Common,
        /// Leave Gamma free (the smallest eigenvalue is then zero).
        #[arg(long)]
        unclamped: bool,
    },
    /// Residuals of the unfolding identities on random fields (always printed as JSON).
    UnfoldCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LAYERHOM_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("LAYERHOM_THREADS = {v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    ExperimentConfig::load(&common.config).with_context(|| format!("reading {}", common.config.display()))
}

fn out_path(common: &Common, cfg: &ExperimentConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.output.json.clone())
}

/// Writes the report to --out and prints it or `summary`.
fn finish<T: Serialize>(common: &Common, cfg: &ExperimentConfig, report: &T, summary: &str, passed: bool) -> Result<ExitCode> {
    let text = serde_json::to_string_pretty(report)?;
    if let Some(p) = out_path(common, cfg) {
        write_file(&p, &text)?;
    }
    if common.json {
        println!("{text}");
    } else {
        print!("{summary}");
        println!("{}", if passed { "all checks passed" } else { "checks FAILED" });
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn dump_mesh(common: &Common, cfg: &ExperimentConfig, cell_only: bool) -> Result<()> {
    let Some(path) = &common.dump_mesh else { return Ok(()) };
    let cell = build_cell(cfg)?;
    let mesh = if cell_only { cell_template(cfg, &cell, cfg.mesh.n_cell)? } else { eps_mesh(cfg, &cell, cfg.single_eps()?)? };
    layerhom::vtk::write_vtk(path, &mesh, None, "mesh")?;
    Ok(())
}

fn write_vtk(path: &Option<PathBuf>, mesh: &layerhom::mesh::HexMesh, state: &layerhom::mesh::FieldState, title: &str) -> Result<()> {
    if let Some(p) = path {
        layerhom::vtk::write_vtk(p, mesh, Some(state), title)?;
    }
    Ok(())
}

fn h_csv_path(out: Option<&Path>, cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.output.csv.clone().or_else(|| out.map(|p| p.with_extension("csv")))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Cell { common } => {
            let cfg = load(&common)?;
            dump_mesh(&common, &cfg, true)?;
            let r = cell_report(&cfg)?;
            if let Some(p) = h_csv_path(out_path(&common, &cfg).as_deref(), &cfg) {
                write_file(&p, &matrix_csv(&r.h))?;
            }
            let mut s = String::from("H =\n");
            for row in &r.h {
                s += &format!("  {:>14.8e} {:>14.8e} {:>14.8e}\n", row[0], row[1], row[2]);
            }
            s += &format!("eigenvalues {:?}, corrector residual {:.2e}\n", r.eigenvalues, r.corrector_residual);
            finish(&common, &cfg, &r, &s, r.positive_definite)
        }
        Command::SolveEps { common, vtk } => {
            let cfg = load(&common)?;
            dump_mesh(&common, &cfg, false)?;
            let (r, run) = solve_eps_report(&cfg)?;
            write_vtk(&vtk, &run.mesh, &run.state, &format!("eps = {}", r.eps))?;
            let s = format!(
                "eps {}  dofs {}  iterations {}  m_eps {:.10e}\nfeasibility {:.2e}  vi {:.2e}  comp_n {:.2e}  comp_t {:.2e}  bound ratio {:.4e}\n",
                r.eps, r.dofs, r.iterations, r.m_eps, r.residuals.feas, r.residuals.vi, r.residuals.comp_n, r.residuals.comp_t, r.bound_ratio
            );
            finish(&common, &cfg, &r, &s, r.converged)
        }
        Command::SolveLimit { common, vtk } => {
            let cfg = load(&common)?;
            dump_mesh(&common, &cfg, false)?;
            let (r, run) = solve_limit_report(&cfg)?;
            write_vtk(&vtk, &run.mesh, &run.state, "limit")?;
            if let (Some(h), Some(p)) = (&r.h, h_csv_path(out_path(&common, &cfg).as_deref(), &cfg)) {
                write_file(&p, &matrix_csv(h))?;
            }
            let s = format!("method {:?}  dofs {}  m {:.10e}\n", r.method, r.dofs, r.m);
            finish(&common, &cfg, &r, &s, r.residuals.converged)
        }
        Command::Converge { common, csv } => {
            let cfg = load(&common)?;
            dump_mesh(&common, &cfg, false)?;
            let r = run_convergence(&cfg);
            let json = out_path(&common, &cfg);
            let csv = csv.or_else(|| cfg.output.csv.clone());
            emit(&r, json.as_deref(), csv.as_deref())?;
            if common.json {
                println!("{}", r.to_json()?);
            } else {
                println!("{:>10} {:>8} {:>18} {:>12} {:>6} {:>9}", "eps", "dofs", "m_eps", "gap", "iters", "time[s]");
                for e in &r.entries {
                    let gap = e.gap.map(|g| format!("{g:.4e}")).unwrap_or_else(|| "-".into());
                    println!("{:>10} {:>8} {:>18.10e} {:>12} {:>6} {:>9.2}", e.eps, e.dofs, e.m_eps, gap, e.iterations, e.runtime_s);
                }
                if let Some(l) = &r.limit {
                    println!("limit ({:?}): m = {:.10e}", l.method, l.m);
                }
                for k in &r.korn {
                    println!("korn eps {}: eigenvalue {:.6e}, constant {:?}", k.eps, k.eigenvalue, k.constant);
                }
                for c in &r.checks {
                    println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
                }
                if let Some(e) = &r.error {
                    println!("aborted: {e}");
                }
            }
            Ok(if r.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Korn { common, unclamped } => {
            let cfg = load(&common)?;
            dump_mesh(&common, &cfg, false)?;
            let space = if unclamped { KornSpace::Unclamped } else { KornSpace::Clamped };
            let r = korn_report(&cfg, space)?;
            let mut s = String::new();
            for k in &r.estimates {
                s += &format!("eps {}  dofs {}  eigenvalue {:.6e}  constant {:?}\n", k.eps, k.dofs, k.eigenvalue, k.constant);
            }
            let passed = match space {
                KornSpace::Clamped => r.spread.is_some_and(|sp| sp < cfg.experiment.korn_spread),
                KornSpace::Unclamped => r.estimates.iter().all(|k| k.eigenvalue <= 1e-12),
            };
            finish(&common, &cfg, &r, &s, passed)
        }
        Command::UnfoldCheck { common, samples, tol } => {
            let cfg = load(&common)?;
            dump_mesh(&common, &cfg, false)?;
            let r = unfold_check(&cfg, samples, tol)?;
            let common = Common { json: true, ..common };
            finish(&common, &cfg, &r, "", r.passed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
