use serde::{Deserialize, Serialize};

use super::{mesh_cell, BoundaryTags, CrackFacet, Element, GridInfo, HexMesh, NodeKind, Region, HEX_CORNERS};
use crate::error::{Error, Result};
use crate::geometry::{BlockFace, CellGeometry, LayeredDomain};

/// How the layer mesh is built from the cell template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerLayout {
    pub eps: f64,
    pub cells: [usize; 2],
    pub xi: Vec<[usize; 2]>,
    pub template: Box<HexMesh>,
    /// cell_nodes[c][t]: global node of template node t in cell c.
    pub cell_nodes: Vec<Vec<usize>>,
    /// cell_elements[c][t]: global element of template element t in cell c.
    pub cell_elements: Vec<Vec<usize>>,
    /// cell_facets[c][t]: global facet of template facet t in cell c.
    pub cell_facets: Vec<Vec<usize>>,
}

/// Levels from `lo` to `hi` with element sizes growing geometrically by
/// `ratio` away from the end selected by `fine_at_hi`.
pub fn block_levels(lo: f64, hi: f64, n: usize, ratio: f64, fine_at_hi: bool) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidDomain("block needs at least one element".into()));
    }
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(Error::InvalidDomain(format!("grading ratio must be >= 1, got {ratio}")));
    }
    let len = hi - lo;
    let sizes: Vec<f64> = (0..n).map(|m| ratio.powi(m as i32)).collect();
    let total: f64 = sizes.iter().sum();
    let mut out = Vec::with_capacity(n + 1);
    if fine_at_hi {
        // smallest element next to hi
        let mut z = hi;
        out.push(hi);
        for (m, s) in sizes.iter().enumerate() {
            z -= len * s / total;
            out.push(if m + 1 == n { lo } else { z });
        }
        out.reverse();
    } else {
        let mut z = lo;
        out.push(lo);
        for (m, s) in sizes.iter().enumerate() {
            z += len * s / total;
            out.push(if m + 1 == n { hi } else { z });
        }
    }
    Ok(out)
}

fn xy_levels(w: f64, n: usize) -> Vec<f64> {
    super::uniform_levels(n, 0.0, w)
}

struct GridBuilder {
    grid: GridInfo,
}

impl GridBuilder {
    fn nodes(&self) -> Vec<[f64; 3]> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.base_count());
        for &z in &g.z {
            for &y in &g.y {
                for &x in &g.x {
                    out.push([x, y, z]);
                }
            }
        }
        out
    }

    fn hex(&self, i: usize, j: usize, k: usize) -> [usize; 8] {
        HEX_CORNERS.map(|c| self.grid.node(i + c[0], j + c[1], k + c[2]))
    }
}

fn lateral_tags(grid: &GridInfo, k_range: std::ops::RangeInclusive<usize>, tags: &mut [Vec<usize>; 4]) {
    let [nx, ny, _] = grid.dims();
    for k in k_range {
        for j in 0..ny {
            for i in 0..nx {
                let id = grid.node(i, j, k);
                if i == 0 {
                    tags[0].push(id);
                }
                if i == nx - 1 {
                    tags[1].push(id);
                }
                if j == 0 {
                    tags[2].push(id);
                }
                if j == ny - 1 {
                    tags[3].push(id);
                }
            }
        }
    }
}

fn gamma_nodes(grid: &GridInfo, faces: &[BlockFace], k_top: usize) -> Vec<usize> {
    let [nx, ny, _] = grid.dims();
    let mut out = Vec::new();
    for k in 0..=k_top {
        for j in 0..ny {
            for i in 0..nx {
                let hit = faces.iter().any(|f| match f {
                    BlockFace::Bottom => k == 0,
                    BlockFace::XMin => i == 0,
                    BlockFace::XMax => i == nx - 1,
                    BlockFace::YMin => j == 0,
                    BlockFace::YMax => j == ny - 1,
                });
                if hit {
                    out.push(grid.node(i, j, k));
                }
            }
        }
    }
    out
}

fn top_facets(grid: &GridInfo, k: usize) -> Vec<[usize; 4]> {
    let [nx, ny, _] = grid.dims();
    let mut out = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            out.push([grid.node(i, j, k), grid.node(i + 1, j, k), grid.node(i + 1, j + 1, k), grid.node(i, j + 1, k)]);
        }
    }
    out
}

/// Mesh of the whole layered domain: lower block, eps-layer built from scaled
/// copies of the cell mesh, and the upper block over (eps, L).
///
/// `n_block` elements per block along x3 graded by `ratio` toward the layer.
pub fn mesh_assembly(domain: &LayeredDomain, cell: &CellGeometry, n_cell: usize, n_block: usize, ratio: f64) -> Result<HexMesh> {
    if !domain.is_exact_tiling() {
        return Err(Error::ExactTilingRequired(format!("omega = {:?} is not a multiple of eps = {}", domain.omega, domain.eps)));
    }
    let template = mesh_cell(cell, n_cell)?;
    let eps = domain.eps;
    let [cx, cy] = domain.cells;
    let nx = cx * n_cell;
    let ny = cy * n_cell;
    let zb = block_levels(-domain.l, 0.0, n_block, ratio, true)?;
    // reference upper-block grid over (0, L), mapped affinely onto (eps, L)
    let za_ref = block_levels(0.0, domain.l, n_block, ratio, false)?;
    let mut z = zb.clone();
    for k in 1..=n_cell {
        z.push(if k == n_cell { eps } else { eps * k as f64 / n_cell as f64 });
    }
    for &zr in za_ref.iter().skip(1) {
        z.push(eps + zr * (domain.l - eps) / domain.l);
    }
    let k_sigma = n_block;
    let k_sa = n_block + n_cell;
    let k_top = z.len() - 1;
    *z.last_mut().unwrap() = domain.l;
    let gb = GridBuilder { grid: GridInfo { x: xy_levels(domain.omega[0], nx), y: xy_levels(domain.omega[1], ny), z } };
    let mut nodes = gb.nodes();
    let mut kinds = vec![NodeKind::Base; nodes.len()];
    let grid = gb.grid.clone();

    let mut elements = Vec::new();
    for k in 0..k_sigma {
        for j in 0..ny {
            for i in 0..nx {
                elements.push(Element { nodes: gb.hex(i, j, k), region: Region::BlockB, cell: None, local: None, weight: 1.0 });
            }
        }
    }

    let tg = &template.grid;
    let tn = n_cell + 1;
    let mut cell_nodes = Vec::with_capacity(domain.xi_set.len());
    let mut cell_elements = Vec::with_capacity(domain.xi_set.len());
    let mut cell_facets = Vec::with_capacity(domain.xi_set.len());
    let mut facets = Vec::new();
    for (c, xi) in domain.xi_set.iter().enumerate() {
        let mut map = vec![usize::MAX; template.node_count()];
        for k in 0..tn {
            for j in 0..tn {
                for i in 0..tn {
                    map[tg.node(i, j, k)] = grid.node(xi[0] * n_cell + i, xi[1] * n_cell + j, k_sigma + k);
                }
            }
        }
        for t in tg.base_count()..template.node_count() {
            let kind = template.kinds[t];
            let base = map[kind.base().expect("template copy has a base node")];
            map[t] = nodes.len();
            nodes.push(nodes[base]);
            kinds.push(match kind {
                NodeKind::InclusionCopy { inclusion, .. } => NodeKind::InclusionCopy { inclusion, base },
                NodeKind::CrackCopy { crack, .. } => NodeKind::CrackCopy { crack, base },
                NodeKind::Base => unreachable!(),
            });
        }
        let mut els = Vec::with_capacity(template.elements.len());
        for (t, te) in template.elements.iter().enumerate() {
            els.push(elements.len());
            elements.push(Element { nodes: te.nodes.map(|l| map[l]), region: te.region, cell: Some(c), local: Some(t), weight: 1.0 });
        }
        let mut fs = Vec::with_capacity(template.facets.len());
        for (t, tf) in template.facets.iter().enumerate() {
            fs.push(facets.len());
            facets.push(CrackFacet {
                plus: tf.plus.map(|l| map[l]),
                minus: tf.minus.map(|l| map[l]),
                normal_axis: tf.normal_axis,
                normal_sign: tf.normal_sign,
                crack: tf.crack,
                cell: Some(c),
                local: Some(t),
                area: tf.area * eps * eps,
            });
        }
        cell_nodes.push(map);
        cell_elements.push(els);
        cell_facets.push(fs);
    }

    for k in k_sa..k_top {
        for j in 0..ny {
            for i in 0..nx {
                elements.push(Element { nodes: gb.hex(i, j, k), region: Region::BlockA, cell: None, local: None, weight: 1.0 });
            }
        }
    }

    let mut boundary = BoundaryTags { gamma: gamma_nodes(&grid, &domain.gamma, k_sigma), ..Default::default() };
    for j in 0..=ny {
        for i in 0..=nx {
            boundary.sigma.push(grid.node(i, j, k_sigma));
            boundary.s_a.push(grid.node(i, j, k_sa));
            boundary.top.push(grid.node(i, j, k_top));
        }
    }
    lateral_tags(&grid, 0..=k_top, &mut boundary.lateral);
    boundary.top_facets = top_facets(&grid, k_top);

    let layout =
        LayerLayout { eps, cells: domain.cells, xi: domain.xi_set.clone(), template: Box::new(template), cell_nodes, cell_elements, cell_facets };
    Ok(HexMesh { nodes, elements, facets, boundary, periodic: Vec::new(), kinds, grid, layout: Some(layout), n_cell })
}

/// Meshes of the two blocks of the limit problem, omega x (-L, 0) and
/// omega x (0, L), with separate node sets on the interface.
///
/// `nxy` elements per lateral direction; the x3 grids are the ones used by
/// [`mesh_assembly`] for the same `n_block` and `ratio`.
pub fn mesh_blocks(omega: [f64; 2], l: f64, nxy: [usize; 2], n_block: usize, ratio: f64, gamma: &[BlockFace]) -> Result<HexMesh> {
    if nxy[0] == 0 || nxy[1] == 0 {
        return Err(Error::InvalidDomain("lateral subdivisions must be positive".into()));
    }
    let zb = block_levels(-l, 0.0, n_block, ratio, true)?;
    let za = block_levels(0.0, l, n_block, ratio, false)?;
    let gb_b = GridBuilder { grid: GridInfo { x: xy_levels(omega[0], nxy[0]), y: xy_levels(omega[1], nxy[1]), z: zb } };
    let gb_a = GridBuilder { grid: GridInfo { x: xy_levels(omega[0], nxy[0]), y: xy_levels(omega[1], nxy[1]), z: za } };
    let mut nodes = gb_b.nodes();
    let offset = nodes.len();
    nodes.extend(gb_a.nodes());
    let kinds = vec![NodeKind::Base; nodes.len()];
    let mut elements = Vec::new();
    for k in 0..n_block {
        for j in 0..nxy[1] {
            for i in 0..nxy[0] {
                elements.push(Element { nodes: gb_b.hex(i, j, k), region: Region::BlockB, cell: None, local: None, weight: 1.0 });
            }
        }
    }
    for k in 0..n_block {
        for j in 0..nxy[1] {
            for i in 0..nxy[0] {
                let hex = gb_a.hex(i, j, k).map(|n| n + offset);
                elements.push(Element { nodes: hex, region: Region::BlockA, cell: None, local: None, weight: 1.0 });
            }
        }
    }
    let mut boundary = BoundaryTags { gamma: gamma_nodes(&gb_b.grid, gamma, n_block), ..Default::default() };
    for j in 0..=nxy[1] {
        for i in 0..=nxy[0] {
            let b = gb_b.grid.node(i, j, n_block);
            let a = gb_a.grid.node(i, j, 0) + offset;
            boundary.sigma.push(b);
            boundary.s_a.push(a);
            boundary.interface_pairs.push((b, a));
            boundary.top.push(gb_a.grid.node(i, j, n_block) + offset);
        }
    }
    lateral_tags(&gb_b.grid, 0..=n_block, &mut boundary.lateral);
    let mut upper: [Vec<usize>; 4] = Default::default();
    lateral_tags(&gb_a.grid, 0..=n_block, &mut upper);
    for (t, u) in boundary.lateral.iter_mut().zip(upper) {
        t.extend(u.into_iter().map(|n| n + offset));
    }
    boundary.top_facets = top_facets(&gb_a.grid, n_block).into_iter().map(|f| f.map(|n| n + offset)).collect();
    Ok(HexMesh { nodes, elements, facets: Vec::new(), boundary, periodic: Vec::new(), kinds, grid: gb_b.grid, layout: None, n_cell: 0 })
}
