//! Trilinear hexahedra on axis-aligned boxes with 2x2x2 Gauss quadrature.

use std::collections::BTreeMap;

use crate::mesh::HEX_CORNERS;

const G: f64 = 0.577_350_269_189_625_8;

/// Reference Gauss points in [-1, 1]^3 (all weights 1).
pub fn gauss_points() -> [[f64; 3]; 8] {
    HEX_CORNERS.map(|c| c.map(|s| if s == 0 { -G } else { G }))
}

/// Reference sign of each local node along each axis.
fn signs(a: usize) -> [f64; 3] {
    HEX_CORNERS[a].map(|s| if s == 0 { -1.0 } else { 1.0 })
}

pub fn shape_values(r: [f64; 3]) -> [f64; 8] {
    std::array::from_fn(|a| {
        let s = signs(a);
        (1.0 + s[0] * r[0]) * (1.0 + s[1] * r[1]) * (1.0 + s[2] * r[2]) / 8.0
    })
}

/// Physical gradients of the shape functions on a box of size `h`.
pub fn shape_grads(h: [f64; 3], r: [f64; 3]) -> [[f64; 3]; 8] {
    std::array::from_fn(|a| {
        let s = signs(a);
        let f = [1.0 + s[0] * r[0], 1.0 + s[1] * r[1], 1.0 + s[2] * r[2]];
        [s[0] * f[1] * f[2] / 8.0 * 2.0 / h[0], f[0] * s[1] * f[2] / 8.0 * 2.0 / h[1], f[0] * f[1] * s[2] / 8.0 * 2.0 / h[2]]
    })
}

/// Physical point of a reference point on the box with lower corner `lo`.
pub fn map_point(lo: [f64; 3], h: [f64; 3], r: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| lo[k] + 0.5 * h[k] * (1.0 + r[k]))
}

pub type Tensor = [[f64; 3]; 3];

/// Symmetric gradient of a nodal field (values per local node) at a reference point.
pub fn strain_at(h: [f64; 3], r: [f64; 3], u: &[[f64; 3]; 8]) -> Tensor {
    let g = grad_at(h, r, u);
    std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (g[i][j] + g[j][i])))
}

/// Full gradient du_i/dx_j.
pub fn grad_at(h: [f64; 3], r: [f64; 3], u: &[[f64; 3]; 8]) -> Tensor {
    let dn = shape_grads(h, r);
    let mut g = [[0.0; 3]; 3];
    for a in 0..8 {
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += u[a][i] * dn[a][j];
            }
        }
    }
    g
}

pub fn ddot(a: &Tensor, b: &Tensor) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Element matrices of one box size, independent of the material.
#[derive(Debug, Clone)]
pub struct ElementForms {
    pub h: [f64; 3],
    pub volume: f64,
    /// int div(N_a e_i) div(N_b e_j), dofs ordered 3a + i.
    pub k_lambda: Box<[[f64; 24]; 24]>,
    /// int 2 e(N_a e_i) : e(N_b e_j).
    pub k_mu: Box<[[f64; 24]; 24]>,
    /// int N_a N_b.
    pub mass: [[f64; 8]; 8],
    /// int grad N_a . grad N_b.
    pub lap: [[f64; 8]; 8],
    /// int N_a.
    pub lumped: [f64; 8],
}

impl ElementForms {
    pub fn new(h: [f64; 3]) -> Self {
        let det = h[0] * h[1] * h[2] / 8.0;
        let mut k_lambda = Box::new([[0.0; 24]; 24]);
        let mut k_mu = Box::new([[0.0; 24]; 24]);
        let mut mass = [[0.0; 8]; 8];
        let mut lap = [[0.0; 8]; 8];
        let mut lumped = [0.0; 8];
        for r in gauss_points() {
            let n = shape_values(r);
            let dn = shape_grads(h, r);
            for a in 0..8 {
                lumped[a] += n[a] * det;
                for b in 0..8 {
                    mass[a][b] += n[a] * n[b] * det;
                    lap[a][b] += (dn[a][0] * dn[b][0] + dn[a][1] * dn[b][1] + dn[a][2] * dn[b][2]) * det;
                    for i in 0..3 {
                        for j in 0..3 {
                            k_lambda[3 * a + i][3 * b + j] += dn[a][i] * dn[b][j] * det;
                            // 2 e(N_a e_i):e(N_b e_j) = delta_ij grad.grad + dN_a/dx_j dN_b/dx_i
                            let mut v = dn[a][j] * dn[b][i];
                            if i == j {
                                v += dn[a][0] * dn[b][0] + dn[a][1] * dn[b][1] + dn[a][2] * dn[b][2];
                            }
                            k_mu[3 * a + i][3 * b + j] += v * det;
                        }
                    }
                }
            }
        }
        Self { h, volume: 8.0 * det, k_lambda, k_mu, mass, lap, lumped }
    }

    pub fn stiffness_entry(&self, lambda: f64, mu: f64, p: usize, q: usize) -> f64 {
        lambda * self.k_lambda[p][q] + mu * self.k_mu[p][q]
    }
}

/// Element forms keyed by exact box size.
#[derive(Debug, Clone, Default)]
pub struct FormCache {
    forms: BTreeMap<[u64; 3], ElementForms>,
}

impl FormCache {
    pub fn get(&mut self, h: [f64; 3]) -> &ElementForms {
        self.forms.entry(h.map(f64::to_bits)).or_insert_with(|| ElementForms::new(h))
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn element_field(f: impl Fn([f64; 3]) -> [f64; 3], lo: [f64; 3], h: [f64; 3]) -> [[f64; 3]; 8] {
        std::array::from_fn(|a| f(std::array::from_fn(|k| lo[k] + h[k] * HEX_CORNERS[a][k] as f64)))
    }

    #[test]
    fn strain_examples() {
        let (lo, h) = ([0.5, -1.0, 2.0], [0.5, 0.25, 2.0]);
        let rigid = element_field(|x| [1.0 + 0.3 * x[1] - 0.2 * x[2], -2.0 - 0.3 * x[0] + 0.7 * x[2], 0.2 * x[0] - 0.7 * x[1]], lo, h);
        let stretch = element_field(|x| [x[0], 0.0, 0.0], lo, h);
        let shear = element_field(|x| [x[1] / 2.0, x[0] / 2.0, 0.0], lo, h);
        for r in gauss_points() {
            let e = strain_at(h, r, &rigid);
            assert!(e.iter().flatten().all(|v| v.abs() < 1e-14));
            let e = strain_at(h, r, &stretch);
            let want = [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]];
            assert!((0..3).all(|i| (0..3).all(|j| (e[i][j] - want[i][j]).abs() < 1e-14)));
            let e = strain_at(h, r, &shear);
            let want = [[0.0, 0.5, 0.0], [0.5, 0.0, 0.0], [0.0; 3]];
            assert!((0..3).all(|i| (0..3).all(|j| (e[i][j] - want[i][j]).abs() < 1e-14)));
        }
    }

    #[test]
    fn unit_hex_kernel_is_rigid_motions() {
        let f = ElementForms::new([1.0, 1.0, 1.0]);
        let k = DMatrix::from_fn(24, 24, |p, q| f.stiffness_entry(1.0, 1.0, p, q));
        let eig = k.symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let zero = eig.eigenvalues.iter().filter(|v| v.abs() < 1e-10 * scale).count();
        assert_eq!(zero, 6);
        assert!(eig.eigenvalues.iter().all(|v| *v > -1e-10 * scale));
    }

    #[test]
    fn constant_integrals_are_exact() {
        let f = ElementForms::new([0.5, 2.0, 0.125]);
        let s: f64 = f.lumped.iter().sum();
        assert!((s - 0.125).abs() < 1e-15);
        assert!(f.lumped.iter().all(|v| (v - 0.125 / 8.0).abs() < 1e-16));
        let m: f64 = f.mass.iter().flatten().sum();
        assert!((m - 0.125).abs() < 1e-15);
        // constants are in the kernel of the Laplacian form
        for a in 0..8 {
            assert!(f.lap[a].iter().sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn stiffness_reproduces_linear_energy() {
        // uniform strain diag(1,0,0): energy density lambda/2 + mu
        let h = [0.5, 0.25, 2.0];
        let f = ElementForms::new(h);
        let u = element_field(|x| [x[0], 0.0, 0.0], [0.0; 3], h);
        let flat: Vec<f64> = u.iter().flatten().copied().collect();
        let (lam, mu) = (2.0, 3.0);
        let mut e = 0.0;
        for p in 0..24 {
            for q in 0..24 {
                e += flat[p] * f.stiffness_entry(lam, mu, p, q) * flat[q];
            }
        }
        assert!((0.5 * e - (lam / 2.0 + mu) * f.volume).abs() < 1e-13);
    }
}
