//! Symmetric positive definite solves: sparse Cholesky and Jacobi-preconditioned CG.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, CsrMatrix};

static SEQUENTIAL: Once = Once::new();

/// Factorizations run sequentially so results do not depend on thread timing.
fn pin_parallelism() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub struct Cholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl Cholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        pin_parallelism();
        let n = a.nrows;
        if n == 0 {
            return Err(Error::Singular("empty system".into()));
        }
        // only the lower triangle is read; CSR of a symmetric matrix is its CSC
        let mut trip = Vec::with_capacity(a.nnz() / 2 + n);
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c <= r {
                    trip.push(Triplet::new(r, c, v));
                }
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::Singular(format!("matrix construction failed: {e:?}")))?;
        let llt = m.sp_cholesky(faer::Side::Lower).map_err(|e| Error::Singular(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Self { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let rhs = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Conjugate gradients with the Jacobi preconditioner.
pub fn pcg(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: PcgOptions) -> Result<PcgResult> {
    let n = a.nrows;
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Singular(format!("non-positive diagonal entry at row {i}")));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(PcgResult { x: vec![0.0; n], iterations: 0, rel_residual: 0.0 });
    }
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..opts.max_iter {
        let res = norm2(&r) / bnorm;
        if res <= opts.rel_tol {
            return Ok(PcgResult { x, iterations: it, rel_residual: res });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular(format!("operator not positive definite (p'Ap = {pap:e})")));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm2(&r) / bnorm;
    if res <= opts.rel_tol {
        Ok(PcgResult { x, iterations: opts.max_iter, rel_residual: res })
    } else {
        Err(Error::Diverged(format!("PCG stopped after {} iterations at relative residual {res:e}", opts.max_iter)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    #[default]
    Cholesky,
    Pcg,
}

/// A prepared SPD solver for repeated right-hand sides.
pub enum SpdSolver {
    Direct(Cholesky),
    Iterative { matrix: CsrMatrix, opts: PcgOptions },
}

impl SpdSolver {
    pub fn new(a: &CsrMatrix, kind: LinearSolverKind, opts: PcgOptions) -> Result<Self> {
        match kind {
            LinearSolverKind::Cholesky => Ok(SpdSolver::Direct(Cholesky::factor(a)?)),
            LinearSolverKind::Pcg => Ok(SpdSolver::Iterative { matrix: a.clone(), opts }),
        }
    }

    pub fn solve(&self, b: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Direct(c) => Ok(c.solve(b)),
            SpdSolver::Iterative { matrix, opts } => Ok(pcg(matrix, b, guess, *opts)?.x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0 + 0.01 * i as f64);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        t.build()
    }

    #[test]
    fn cholesky_and_pcg_agree() {
        let a = laplacian(200);
        let b: Vec<f64> = (0..200).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let x1 = Cholesky::factor(&a).unwrap().solve(&b);
        let x2 = pcg(&a, &b, None, PcgOptions::default()).unwrap().x;
        let scale = x1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() <= 1e-9 * scale);
        }
        let r = a.mul_vec(&x1);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(1, 1, -1.0);
        let a = t.build();
        assert!(Cholesky::factor(&a).is_err());
        assert!(pcg(&a, &[1.0, 1.0], None, PcgOptions::default()).is_err());
    }
}
