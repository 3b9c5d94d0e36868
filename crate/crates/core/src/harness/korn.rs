//! Smallest generalized eigenvalue of (strain form, H1 form): an empirical
//! Korn constant for a discrete space.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_h1_form, assemble_strain_form};
use crate::dofs::{mesh_dof_map, DofMap, DofMapBuilder, LateralCondition};
use crate::error::{Error, Result};
use crate::linsolve::Cholesky;
use crate::mesh::HexMesh;
use crate::sparse::{dot, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KornSpace {
    /// Gamma clamped.
    Clamped,
    /// Only unused nodes fixed; rigid motions are in the space.
    Unclamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KornOptions {
    pub block: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for KornOptions {
    fn default() -> Self {
        Self { block: 8, max_iter: 400, tol: 1e-10, seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KornEstimate {
    pub eps: f64,
    pub eigenvalue: f64,
    /// 1 / sqrt(eigenvalue); absent for a zero eigenvalue.
    pub constant: Option<f64>,
    pub iterations: usize,
    pub dofs: usize,
}

fn probe_dofs(mesh: &HexMesh, space: KornSpace) -> Result<DofMap> {
    match space {
        KornSpace::Clamped => mesh_dof_map(mesh, LateralCondition::Free),
        KornSpace::Unclamped => {
            let mut b = DofMapBuilder::new(mesh.dof_count());
            for (n, used) in mesh.used_nodes().into_iter().enumerate() {
                if !used {
                    b.fix_node(n, [0.0; 3]);
                }
            }
            b.build()
        }
    }
}

/// Subspace iteration with (S + sigma N)^{-1} N and Rayleigh-Ritz on the
/// eps-weighted strain form S and H1 form N of `mesh`.
pub fn korn_probe(mesh: &HexMesh, eps: f64, space: KornSpace, opts: &KornOptions) -> Result<KornEstimate> {
    let dofs = probe_dofs(mesh, space)?;
    let s = dofs.reduce_matrix(&assemble_strain_form(mesh, eps));
    let nm = dofs.reduce_matrix(&assemble_h1_form(mesh, eps));
    let n = s.nrows;
    let b = opts.block.min(n);
    if b == 0 {
        return Err(Error::Singular("no free dofs".into()));
    }
    let trace = |m: &CsrMatrix| m.diagonal().iter().sum::<f64>();
    let sigma = 1e-2 * trace(&s) / trace(&nm);
    let chol = Cholesky::factor(&s.add_scaled(sigma, &nm))?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..b).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut prev = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let y: Vec<Vec<f64>> = x.par_iter().map(|v| chol.solve(&nm.mul_vec(v))).collect();
        let (theta, next) = rayleigh_ritz(&s, &nm, &y)?;
        let top = theta[b - 1].abs();
        let t0 = theta[0];
        x = next;
        if (t0 - prev).abs() <= opts.tol * t0.abs() + 1e-15 * top {
            let eigenvalue = t0.max(0.0);
            let constant = if eigenvalue > 1e-14 * top { Some(1.0 / eigenvalue.sqrt()) } else { None };
            return Ok(KornEstimate { eps, eigenvalue, constant, iterations: it, dofs: n });
        }
        prev = t0;
    }
    Err(Error::Stagnation(format!("no convergence after {} iterations (last value {prev:.6e})", opts.max_iter)))
}

/// Ritz values (ascending) and N-orthonormal Ritz vectors of the span of `y`.
fn rayleigh_ritz(s: &CsrMatrix, nm: &CsrMatrix, y: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let b = y.len();
    let sy: Vec<Vec<f64>> = y.par_iter().map(|v| s.mul_vec(v)).collect();
    let ny: Vec<Vec<f64>> = y.par_iter().map(|v| nm.mul_vec(v)).collect();
    let sq = DMatrix::from_fn(b, b, |i, j| 0.5 * (dot(&y[i], &sy[j]) + dot(&y[j], &sy[i])));
    let nq = DMatrix::from_fn(b, b, |i, j| 0.5 * (dot(&y[i], &ny[j]) + dot(&y[j], &ny[i])));
    let l = nq.cholesky().ok_or_else(|| Error::Stagnation("search directions became dependent".into()))?.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::Stagnation("search directions became dependent".into()))?;
    let c = &linv * sq * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let coef = linv.transpose() * &eig.eigenvectors;
    let n = y[0].len();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v = vec![0.0; n];
            for (i, yi) in y.iter().enumerate() {
                let w = coef[(i, k)];
                v.iter_mut().zip(yi).for_each(|(a, b)| *a += w * b);
            }
            v
        })
        .collect();
    Ok((order.iter().map(|&k| eig.eigenvalues[k]).collect(), vectors))
}
