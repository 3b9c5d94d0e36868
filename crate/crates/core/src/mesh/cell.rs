use std::collections::HashMap;

use super::{hex_face, BoundaryTags, CrackFacet, Element, GridInfo, HexMesh, NodeKind, Region, HEX_CORNERS};
use crate::error::{Error, Result};
use crate::geometry::CellGeometry;

fn check_subdivision(cell: &CellGeometry, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::IncompatibleSubdivision("n must be positive".into()));
    }
    let bp = cell.breakpoints();
    for (axis, pts) in bp.iter().enumerate() {
        for &p in pts {
            let r = p * n as f64;
            if (r - r.round()).abs() > 1e-9 {
                return Err(Error::IncompatibleSubdivision(format!("coordinate {p} on axis {axis} is not a multiple of 1/{n}")));
            }
        }
    }
    Ok(())
}

fn snap(p: f64, n: usize) -> usize {
    (p * n as f64).round() as usize
}

/// Structured mesh of the unit cell with `n` elements per axis.
///
/// Inclusion elements use their own copies of the nodes on the inclusion
/// boundary; elements on the positive side of an open crack use copies of the
/// nodes interior to the crack rectangle. Crack-front nodes are shared.
pub fn mesh_cell(cell: &CellGeometry, n: usize) -> Result<HexMesh> {
    check_subdivision(cell, n)?;
    let levels = super::uniform_levels(n, 0.0, 1.0);
    let grid = GridInfo { x: levels.clone(), y: levels.clone(), z: levels };
    let np = n + 1;
    let mut nodes = Vec::with_capacity(np * np * np);
    let mut kinds = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                nodes.push([grid.x[i], grid.y[j], grid.z[k]]);
                kinds.push(NodeKind::Base);
            }
        }
    }

    // integer boxes of inclusions and integer rectangles of open cracks
    let boxes: Vec<([usize; 3], [usize; 3])> = cell
        .inclusions
        .iter()
        .map(|b| ([snap(b.lo[0], n), snap(b.lo[1], n), snap(b.lo[2], n)], [snap(b.hi[0], n), snap(b.hi[1], n), snap(b.hi[2], n)]))
        .collect();
    let cracks: Vec<(usize, usize, [usize; 2], [usize; 2])> = cell
        .open_cracks
        .iter()
        .map(|c| (c.axis, snap(c.level, n), [snap(c.lo[0], n), snap(c.lo[1], n)], [snap(c.hi[0], n), snap(c.hi[1], n)]))
        .collect();

    let on_box_boundary = |b: &([usize; 3], [usize; 3]), g: [usize; 3]| {
        let inside = (0..3).all(|a| g[a] >= b.0[a] && g[a] <= b.1[a]);
        inside && (0..3).any(|a| g[a] == b.0[a] || g[a] == b.1[a])
    };
    let in_crack_interior = |c: &(usize, usize, [usize; 2], [usize; 2]), g: [usize; 3]| {
        let [p0, p1] = crate::geometry::plane_axes(c.0);
        g[c.0] == c.1 && g[p0] > c.2[0] && g[p0] < c.3[0] && g[p1] > c.2[1] && g[p1] < c.3[1]
    };

    // duplicates, created in base-node order so numbering is deterministic
    let mut incl_copy: HashMap<(usize, usize), usize> = HashMap::new();
    let mut crack_copy: HashMap<(usize, usize), usize> = HashMap::new();
    for (jb, b) in boxes.iter().enumerate() {
        for k in b.0[2]..=b.1[2] {
            for j in b.0[1]..=b.1[1] {
                for i in b.0[0]..=b.1[0] {
                    if on_box_boundary(b, [i, j, k]) {
                        let base = grid.node(i, j, k);
                        incl_copy.insert((jb + 1, base), nodes.len());
                        nodes.push(nodes[base]);
                        kinds.push(NodeKind::InclusionCopy { inclusion: jb + 1, base });
                    }
                }
            }
        }
    }
    for (ci, c) in cracks.iter().enumerate() {
        let [p0, p1] = crate::geometry::plane_axes(c.0);
        for s in c.2[1] + 1..c.3[1] {
            for r in c.2[0] + 1..c.3[0] {
                let mut g = [0usize; 3];
                g[c.0] = c.1;
                g[p0] = r;
                g[p1] = s;
                let base = grid.node(g[0], g[1], g[2]);
                crack_copy.insert((ci, base), nodes.len());
                nodes.push(nodes[base]);
                kinds.push(NodeKind::CrackCopy { crack: ci, base });
            }
        }
    }

    let mut elements = Vec::with_capacity(n * n * n);
    let mut facets = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let center = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64, (k as f64 + 0.5) / n as f64];
                let region = match cell.inclusion_at(center) {
                    Some(jb) => Region::Inclusion(jb),
                    None => Region::Matrix,
                };
                let corner_grid: [[usize; 3]; 8] = HEX_CORNERS.map(|c| [i + c[0], j + c[1], k + c[2]]);
                let mut en = [0usize; 8];
                for (a, g) in corner_grid.iter().enumerate() {
                    let base = grid.node(g[0], g[1], g[2]);
                    en[a] = match region {
                        Region::Inclusion(jb) if on_box_boundary(&boxes[jb - 1], *g) => incl_copy[&(jb, base)],
                        Region::Matrix => {
                            let mut id = base;
                            for (ci, c) in cracks.iter().enumerate() {
                                // element on the positive side of the crack plane
                                if k_of(&corner_grid, c.0) == c.1 && in_crack_interior(c, *g) {
                                    id = crack_copy[&(ci, base)];
                                }
                            }
                            id
                        }
                        _ => base,
                    };
                }
                let local = elements.len();
                elements.push(Element { nodes: en, region, cell: None, local: Some(local), weight: 1.0 });

                let h = 1.0 / n as f64;
                match region {
                    Region::Inclusion(jb) => {
                        let b = &boxes[jb - 1];
                        for axis in 0..3 {
                            for positive in [false, true] {
                                let face_level = if positive { corner_grid[6][axis] } else { corner_grid[0][axis] };
                                let boundary_level = if positive { b.1[axis] } else { b.0[axis] };
                                if face_level != boundary_level {
                                    continue;
                                }
                                let lf = hex_face(axis, positive);
                                let plus = lf.map(|l| en[l]);
                                let minus = lf.map(|l| {
                                    let g = corner_grid[l];
                                    grid.node(g[0], g[1], g[2])
                                });
                                facets.push(CrackFacet {
                                    plus,
                                    minus,
                                    normal_axis: axis,
                                    normal_sign: if positive { 1.0 } else { -1.0 },
                                    crack: jb,
                                    cell: None,
                                    local: None,
                                    area: h * h,
                                });
                            }
                        }
                    }
                    Region::Matrix => {
                        for c in &cracks {
                            if k_of(&corner_grid, c.0) != c.1 {
                                continue;
                            }
                            let lf = hex_face(c.0, false);
                            let [p0, p1] = crate::geometry::plane_axes(c.0);
                            let g0 = corner_grid[lf[0]];
                            let inside = g0[p0] >= c.2[0] && g0[p0] < c.3[0] && g0[p1] >= c.2[1] && g0[p1] < c.3[1];
                            if !inside {
                                continue;
                            }
                            let plus = lf.map(|l| en[l]);
                            let minus = lf.map(|l| {
                                let g = corner_grid[l];
                                grid.node(g[0], g[1], g[2])
                            });
                            facets.push(CrackFacet {
                                plus,
                                minus,
                                normal_axis: c.0,
                                normal_sign: 1.0,
                                crack: 0,
                                cell: None,
                                local: None,
                                area: h * h,
                            });
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    for (l, f) in facets.iter_mut().enumerate() {
        f.local = Some(l);
    }

    let mut boundary = BoundaryTags::default();
    let mut periodic = Vec::new();
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                let id = grid.node(i, j, k);
                if k == 0 {
                    boundary.sigma.push(id);
                }
                if k == n {
                    boundary.s_a.push(id);
                }
                if i == 0 {
                    boundary.lateral[0].push(id);
                }
                if i == n {
                    boundary.lateral[1].push(id);
                }
                if j == 0 {
                    boundary.lateral[2].push(id);
                }
                if j == n {
                    boundary.lateral[3].push(id);
                }
                if i == n || j == n {
                    periodic.push((id, grid.node(i % n, j % n, k)));
                }
            }
        }
    }

    Ok(HexMesh { nodes, elements, facets, boundary, periodic, kinds, grid, layout: None, n_cell: n })
}

/// Lower grid index of the element along `axis`.
fn k_of(corners: &[[usize; 3]; 8], axis: usize) -> usize {
    corners[0][axis]
}
