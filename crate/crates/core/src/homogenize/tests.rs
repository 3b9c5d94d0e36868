use super::*;
use crate::assembly::{Loads, Material, Materials};
use crate::contact::{ContactData, SolverOptions};
use crate::dofs::LateralCondition;
use crate::expr::{Expr, VectorExpr};
use crate::geometry::{build_unit_cell, BlockFace, CellGeometry, CellSpec, OpenCrack};
use crate::mesh::{mesh_blocks, mesh_cell, HexMesh, Region};
use crate::rigid::{inclusion_patches, project_patch};

fn unit(l: f64, m: f64) -> Materials {
    Materials::uniform(Material::new(l, m))
}

fn holed(lo: f64, hi: f64, n: usize) -> HexMesh {
    let cell = build_unit_cell(&CellSpec { inclusions: vec![[lo, lo, lo, hi, hi, hi]], open_cracks: vec![] }).unwrap();
    mesh_cell(&cell, n).unwrap().without_regions(|r| matches!(r, Region::Inclusion(_)))
}

fn h_of(mesh: &HexMesh, mats: &Materials) -> EffectiveInterface {
    let set = solve_correctors(mesh, mats).unwrap();
    assert!(set.residuals.iter().all(|r| *r <= 1e-10), "{:?}", set.residuals);
    effective_h(&set, mats).unwrap()
}

#[test]
fn homogeneous_cell_has_affine_correctors() {
    for (n, lambda, mu) in [(1, 1.0, 1.0), (2, 1.0, 1.0), (3, 2.0, 0.5)] {
        let mesh = mesh_cell(&CellGeometry::homogeneous(), n).unwrap();
        let mats = unit(lambda, mu);
        let set = solve_correctors(&mesh, &mats).unwrap();
        for (i, chi) in set.chi.iter().enumerate() {
            for (node, y) in mesh.nodes.iter().enumerate() {
                let v = chi.node(node);
                for c in 0..3 {
                    let want = if c == i { y[2] } else { 0.0 };
                    assert!((v[c] - want).abs() <= 1e-12, "n {n} chi{i} node {node}: {v:?}");
                }
            }
        }
        let h = effective_h(&set, &mats).unwrap();
        let want = [mu, mu, lambda + 2.0 * mu];
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { want[i] } else { 0.0 };
                assert!((h.h[i][j] - w).abs() <= 1e-10, "n {n}: {:?}", h.h);
            }
        }
        assert!(h.is_positive_definite());
    }
}

#[test]
fn corrector_boundary_values_are_exact() {
    let mesh = holed(0.25, 0.75, 4);
    let set = solve_correctors(&mesh, &unit(1.0, 1.0)).unwrap();
    for (i, chi) in set.chi.iter().enumerate() {
        for &n in &mesh.boundary.sigma {
            assert_eq!(chi.node(n), [0.0; 3]);
        }
        let mut e = [0.0; 3];
        e[i] = 1.0;
        for &n in &mesh.boundary.s_a {
            assert_eq!(chi.node(n), e);
        }
        for &(s, m) in &mesh.periodic {
            assert_eq!(chi.node(s), chi.node(m));
        }
    }
}

#[test]
fn hole_lowers_every_diagonal_entry() {
    let mats = unit(1.0, 1.0);
    let full = h_of(&mesh_cell(&CellGeometry::homogeneous(), 8).unwrap(), &mats);
    let small = h_of(&holed(0.375, 0.625, 8), &mats);
    let big = h_of(&holed(0.25, 0.75, 8), &mats);
    for i in 0..3 {
        assert!(small.h[i][i] < full.h[i][i], "{i}: {:?} vs {:?}", small.h, full.h);
        assert!(big.h[i][i] < small.h[i][i], "{i}: {:?} vs {:?}", big.h, small.h);
    }
    for h in [&small, &big] {
        for i in 0..3 {
            for j in 0..3 {
                assert!((h.h[i][j] - h.h[j][i]).abs() <= 1e-14);
            }
        }
        assert!(h.is_positive_definite(), "{:?}", h.eigenvalues);
    }
}

#[test]
fn floating_inclusion_is_reported() {
    let cell = build_unit_cell(&CellSpec { inclusions: vec![[0.25, 0.25, 0.25, 0.75, 0.75, 0.75]], open_cracks: vec![] }).unwrap();
    let mesh = mesh_cell(&cell, 4).unwrap();
    assert!(matches!(solve_correctors(&mesh, &unit(1.0, 1.0)), Err(crate::Error::Singular(_))));
    // glued back, the cell is homogeneous again
    let h = h_of(&mesh.glue_inclusions(), &unit(1.0, 1.0));
    assert!((h.h[2][2] - 3.0).abs() < 1e-10 && (h.h[0][0] - 1.0).abs() < 1e-10);
}

#[test]
fn reconstruction_matches_traces() {
    let mesh = holed(0.25, 0.75, 4);
    let set = solve_correctors(&mesh, &unit(1.0, 2.0)).unwrap();
    let t = [0.3, -1.2, 0.7];
    let same = reconstruct_layer(&set, &[t], &[t]).unwrap();
    let used = mesh.used_nodes();
    for n in (0..mesh.node_count()).filter(|n| used[*n]) {
        let v = same[0].node(n);
        assert!((0..3).all(|c| (v[c] - t[c]).abs() <= 1e-14), "{v:?}");
    }
    let third = reconstruct_layer(&set, &[[0.0, 0.0, 1.0]], &[[0.0; 3]]).unwrap();
    assert_eq!(third[0], set.chi[2]);
    let (ua, ub) = ([[1.0, 2.0, -0.5], [0.0, 0.1, 0.2]], [[0.5, -1.0, 0.25], [0.3, 0.0, -0.4]]);
    let u0 = reconstruct_layer(&set, &ua, &ub).unwrap();
    for g in 0..2 {
        for &n in &mesh.boundary.sigma {
            assert_eq!(u0[g].node(n), ub[g]);
        }
        for &n in &mesh.boundary.s_a {
            let v = u0[g].node(n);
            assert!((0..3).all(|c| (v[c] - ua[g][c]).abs() <= 1e-15));
        }
    }
    // linear in the traces
    let sum = reconstruct_layer(&set, &[[1.0, 2.1, -0.3]], &[[0.8, -1.0, -0.15]]).unwrap();
    for k in 0..mesh.dof_count() {
        assert!((sum[0].values[k] - u0[0].values[k] - u0[1].values[k]).abs() <= 1e-13);
    }
}

fn sandwich(h: &[[f64; 3]; 3], t: [f64; 3], lateral: LateralCondition) -> (HexMesh, TransmissionSolution) {
    let blocks = mesh_blocks([1.0, 1.0], 1.0, [2, 2], 3, 1.5, &[BlockFace::Bottom]).unwrap();
    let mats = Materials { block_b: Material::new(2.0, 0.5), block_a: Material::new(1.0, 3.0), ..unit(1.0, 1.0) };
    let loads = Loads { top_traction: Some(t), ..Default::default() };
    let s = solve_transmission(&blocks, &mats, h, &loads, lateral).unwrap();
    (blocks, s)
}

#[test]
fn sandwich_normal_jump_is_traction_over_h33() {
    let h = h_of(&holed(0.25, 0.75, 4), &unit(1.0, 1.0)).h;
    let (blocks, s) = sandwich(&h, [0.0, 0.0, 1.0], LateralCondition::Roller);
    assert!(s.residual <= 1e-10);
    for j in &s.jumps {
        assert!((j[2] - 1.0 / h[2][2]).abs() <= 1e-8 / h[2][2], "{j:?} vs {}", 1.0 / h[2][2]);
    }
    // lower block: u3 = t (x3 + L) / (lambda + 2 mu)
    for (n, x) in blocks.nodes.iter().enumerate().filter(|(_, x)| x[2] < 0.0) {
        let want = (x[2] + 1.0) / 3.0;
        assert!((s.state.node(n)[2] - want).abs() <= 1e-10, "node {n}");
    }
}

#[test]
fn sandwich_tangential_jump_is_traction_over_h11() {
    let h = h_of(&holed(0.25, 0.75, 4), &unit(1.0, 1.0)).h;
    let (_, s) = sandwich(&h, [1.0, 0.0, 0.0], LateralCondition::Periodic);
    for j in &s.jumps {
        assert!((j[0] - 1.0 / h[0][0]).abs() <= 1e-8 / h[0][0], "{j:?}");
    }
}

#[test]
fn transmission_without_load_is_zero() {
    let (_, s) = sandwich(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]], [0.0; 3], LateralCondition::Free);
    assert_eq!(s.state.max_abs(), 0.0);
    assert_eq!(s.m_lin, 0.0);
}

fn block_loads() -> Loads {
    Loads {
        f: VectorExpr(["0.3".parse::<Expr>().unwrap(), "-0.2*x1".parse().unwrap(), "-1".parse().unwrap()]),
        top_traction: Some([0.1, 0.0, -0.5]),
        ..Default::default()
    }
}

#[test]
fn unfolded_limit_without_contact_equals_transmission() {
    let blocks = mesh_blocks([1.0, 1.0], 1.0, [3, 2], 2, 1.0, &[BlockFace::Bottom]).unwrap();
    let cell = build_unit_cell(&CellSpec { inclusions: vec![[0.25, 0.25, 0.25, 0.75, 0.75, 0.75]], open_cracks: vec![] }).unwrap();
    let template = holed(0.25, 0.75, 4);
    let mats = Materials { block_b: Material::new(2.0, 0.5), matrix: Material::new(1.0, 0.7), ..unit(1.0, 1.0) };
    let h = h_of(&template, &mats).h;
    let loads = block_loads();
    let lin = solve_transmission(&blocks, &mats, &h, &loads, LateralCondition::Free).unwrap();
    let p = LimitProblem::assemble(&blocks, &template, &cell, &mats, &loads, &ContactData::default(), LateralCondition::Free).unwrap();
    assert!(p.contact.points.is_empty());
    let (state, report) = solve_unfolded_limit(&p, &SolverOptions { vi_samples: 8, ..Default::default() }).unwrap();
    assert!(report.converged);
    assert!((state.m - lin.m_lin).abs() <= 1e-8 * lin.m_lin.abs(), "{} vs {}", state.m, lin.m_lin);
    let scale = lin.state.max_abs();
    for k in 0..blocks.dof_count() {
        assert!((state.blocks.values[k] - lin.state.values[k]).abs() <= 1e-8 * scale);
    }
    // the cell fields are the reconstruction from the traces
    let set = solve_correctors(&template, &mats).unwrap();
    let rec = reconstruct_layer(&set, &state.trace_a(&blocks), &state.trace_b(&blocks)).unwrap();
    let used = template.used_nodes();
    for (g, r) in rec.iter().enumerate() {
        for n in (0..template.node_count()).filter(|n| used[*n]) {
            let (a, b) = (r.node(n), state.layer[g].node(n));
            assert!((0..3).all(|c| (a[c] - b[c]).abs() <= 1e-8 * scale));
        }
    }
}

#[test]
fn limit_interface_matching_is_exact() {
    let blocks = mesh_blocks([1.0, 1.0], 1.0, [2, 2], 2, 1.0, &[BlockFace::Bottom]).unwrap();
    let cell = build_unit_cell(&CellSpec { inclusions: vec![], open_cracks: vec![] }).unwrap();
    let template = mesh_cell(&cell, 2).unwrap();
    let p =
        LimitProblem::assemble(&blocks, &template, &cell, &unit(1.0, 1.0), &block_loads(), &ContactData::default(), LateralCondition::Free).unwrap();
    let (state, _) = solve_unfolded_limit(&p, &SolverOptions { vi_samples: 4, ..Default::default() }).unwrap();
    let (ta, tb) = (state.trace_a(&blocks), state.trace_b(&blocks));
    for g in 0..p.limit.copies() {
        for &n in &template.boundary.sigma {
            assert_eq!(state.layer[g].node(n), tb[g]);
        }
        for &n in &template.boundary.s_a {
            assert_eq!(state.layer[g].node(n), ta[g]);
        }
    }
}

fn contact_cell() -> CellGeometry {
    build_unit_cell(&CellSpec {
        inclusions: vec![[0.25, 0.25, 0.5, 0.75, 0.75, 0.75]],
        open_cracks: vec![OpenCrack { axis: 2, level: 0.25, lo: [0.25, 0.25], hi: [0.75, 0.75] }],
    })
    .unwrap()
}

#[test]
fn limit_with_zero_loads_is_zero() {
    let blocks = mesh_blocks([1.0, 1.0], 1.0, [1, 1], 1, 1.0, &[BlockFace::Bottom]).unwrap();
    let cell = contact_cell();
    let template = mesh_cell(&cell, 4).unwrap();
    let p = LimitProblem::assemble(&blocks, &template, &cell, &unit(1.0, 1.0), &Loads::default(), &ContactData::default(), LateralCondition::Free)
        .unwrap();
    let (state, report) = solve_unfolded_limit(&p, &SolverOptions { vi_samples: 4, ..Default::default() }).unwrap();
    assert_eq!(state.m, 0.0);
    assert_eq!(state.full.max_abs(), 0.0);
    assert!(report.converged);
}

#[test]
fn limit_with_contact_is_feasible_and_below_zero() {
    let blocks = mesh_blocks([1.0, 1.0], 1.0, [1, 1], 2, 1.0, &[BlockFace::Bottom]).unwrap();
    let cell = contact_cell();
    let template = mesh_cell(&cell, 4).unwrap();
    let loads = Loads {
        f: VectorExpr::constant([0.2, 0.0, -1.0]),
        inclusion_forces: vec![VectorExpr(["x1 + y3".parse::<Expr>().unwrap(), "0".parse().unwrap(), "-0.5".parse().unwrap()])],
        top_traction: None,
    };
    let data = ContactData {
        gap: vec![Expr::constant(0.0), Expr::constant(0.01)],
        friction: vec![Expr::constant(0.1), "0.1 + x1".parse().unwrap()],
        friction_lower: vec![],
    };
    let p = LimitProblem::assemble(&blocks, &template, &cell, &unit(1.0, 1.0), &loads, &data, LateralCondition::Free).unwrap();
    assert!(!p.contact.points.is_empty());
    let (state, report) = solve_unfolded_limit(&p, &SolverOptions { vi_samples: 40, ..Default::default() }).unwrap();
    assert!(report.converged, "{report:?}");
    assert!(state.m <= 0.0);
    assert!(report.feasibility <= 1e-10);
    assert!(report.vi_residual >= -1e-8, "{}", report.vi_residual);
    // the inclusion fields left after removing s^j carry no rigid part
    let patch = inclusion_patches(&template).into_iter().next().unwrap();
    for g in 0..p.limit.copies() {
        let pr = project_patch(&template, &state.layer[g], &patch, cell.centers[0]).unwrap();
        let size = pr.state_l2.max(1e-300);
        assert!(pr.a.iter().chain(&pr.b).all(|v| v.abs() <= 1e-10 * size.max(1.0)), "{pr:?}");
    }
}
