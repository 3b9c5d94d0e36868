//! Unit cell with inclusions and open cracks, and the eps-tiling of the layer.
//!
//! Cell coordinates are dimensionless and live in Y = (0,1)^3. Inclusions are
//! open axis-aligned boxes whose boundaries are the closed cracks; open cracks
//! are axis-aligned rectangles lying in the matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether lengths are integer multiples.
pub const TILING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl CellBox {
    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn surface_area(&self) -> f64 {
        let d = [self.hi[0] - self.lo[0], self.hi[1] - self.lo[1], self.hi[2] - self.lo[2]];
        2.0 * (d[0] * d[1] + d[1] * d[2] + d[0] * d[2])
    }

    pub fn center(&self) -> [f64; 3] {
        [0.5 * (self.lo[0] + self.hi[0]), 0.5 * (self.lo[1] + self.hi[1]), 0.5 * (self.lo[2] + self.hi[2])]
    }

    /// Point in the open box.
    pub fn contains_open(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] > self.lo[a] && p[a] < self.hi[a])
    }

    pub fn contains_closed(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }

    pub fn on_boundary(&self, p: [f64; 3]) -> bool {
        self.contains_closed(p) && !self.contains_open(p)
    }

    fn boundary_distance(&self) -> f64 {
        (0..3).map(|a| self.lo[a].min(1.0 - self.hi[a])).fold(f64::INFINITY, f64::min)
    }
}

/// The two in-plane axes of a plane normal to `axis`, in increasing order.
pub fn plane_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Open crack {y_axis = level} x [lo0,hi0] x [lo1,hi1], the rectangle given in
/// the in-plane axes of [`plane_axes`]. Its normal is +e_axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenCrack {
    pub axis: usize,
    pub level: f64,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl OpenCrack {
    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    pub fn normal(&self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis] = 1.0;
        n
    }

    /// Closed rectangle membership.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let [a0, a1] = plane_axes(self.axis);
        p[self.axis] == self.level && p[a0] >= self.lo[0] && p[a0] <= self.hi[0] && p[a1] >= self.lo[1] && p[a1] <= self.hi[1]
    }

    /// Relative interior of the rectangle within its plane.
    pub fn contains_interior(&self, p: [f64; 3]) -> bool {
        let [a0, a1] = plane_axes(self.axis);
        p[self.axis] == self.level && p[a0] > self.lo[0] && p[a0] < self.hi[0] && p[a1] > self.lo[1] && p[a1] < self.hi[1]
    }

    /// Extent of the rectangle along global axis `a` (degenerate along the normal).
    pub fn extent(&self, a: usize) -> (f64, f64) {
        if a == self.axis {
            return (self.level, self.level);
        }
        let [a0, _] = plane_axes(self.axis);
        if a == a0 {
            (self.lo[0], self.hi[0])
        } else {
            (self.lo[1], self.hi[1])
        }
    }

    fn boundary_distance(&self) -> f64 {
        (0..3)
            .map(|a| {
                let (l, h) = self.extent(a);
                l.min(1.0 - h)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Input description of a cell, as read from configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    /// Boxes as [x0, y0, z0, x1, y1, z1].
    #[serde(default)]
    pub inclusions: Vec<[f64; 6]>,
    #[serde(default)]
    pub open_cracks: Vec<OpenCrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub inclusions: Vec<CellBox>,
    pub open_cracks: Vec<OpenCrack>,
    /// Smallest distance from any crack to the cell boundary.
    pub eta: f64,
    /// Two-sided normal clearance of the open cracks (infinite when there are none).
    pub t0: f64,
    /// Centers of gravity of the inclusions.
    pub centers: Vec<[f64; 3]>,
}

impl CellGeometry {
    pub fn homogeneous() -> Self {
        build_unit_cell(&CellSpec::default()).expect("empty cell is valid")
    }

    /// Number of crack families: index 0 is the open cracks, j >= 1 inclusion j.
    pub fn crack_families(&self) -> usize {
        self.inclusions.len() + 1
    }

    /// Measure of the matrix part Y^0.
    pub fn matrix_volume(&self) -> f64 {
        1.0 - self.inclusions.iter().map(CellBox::volume).sum::<f64>()
    }

    /// Area of crack family j (0: open cracks, j >= 1: boundary of inclusion j).
    pub fn crack_area(&self, j: usize) -> f64 {
        if j == 0 {
            self.open_cracks.iter().map(OpenCrack::area).sum()
        } else {
            self.inclusions[j - 1].surface_area()
        }
    }

    /// Region of a point strictly inside an element: None for the matrix, Some(j) for inclusion j >= 1.
    pub fn inclusion_at(&self, p: [f64; 3]) -> Option<usize> {
        self.inclusions.iter().position(|b| b.contains_open(p)).map(|i| i + 1)
    }

    /// Every coordinate that must coincide with a mesh plane, per axis.
    pub fn breakpoints(&self) -> [Vec<f64>; 3] {
        let mut out: [Vec<f64>; 3] = Default::default();
        for b in &self.inclusions {
            for a in 0..3 {
                out[a].push(b.lo[a]);
                out[a].push(b.hi[a]);
            }
        }
        for c in &self.open_cracks {
            for (a, pts) in out.iter_mut().enumerate() {
                let (l, h) = c.extent(a);
                pts.push(l);
                pts.push(h);
            }
        }
        out
    }
}

fn closed_intervals_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

fn interval_distance(x: f64, iv: (f64, f64)) -> f64 {
    if x < iv.0 {
        iv.0 - x
    } else if x > iv.1 {
        x - iv.1
    } else {
        0.0
    }
}

fn boxes_closures_meet(a: &CellBox, b: &CellBox) -> bool {
    (0..3).all(|k| closed_intervals_overlap((a.lo[k], a.hi[k]), (b.lo[k], b.hi[k])))
}

fn crack_meets_box(c: &OpenCrack, b: &CellBox) -> bool {
    (0..3).all(|k| closed_intervals_overlap(c.extent(k), (b.lo[k], b.hi[k])))
}

fn cracks_meet(c: &OpenCrack, d: &OpenCrack) -> bool {
    (0..3).all(|k| closed_intervals_overlap(c.extent(k), d.extent(k)))
}

/// Distance along the normal of `c` from its rectangle to the nearest obstacle
/// (cell boundary, inclusion closure, another open crack), on both sides.
fn normal_clearance(c: &OpenCrack, geo_boxes: &[CellBox], cracks: &[OpenCrack], me: usize) -> f64 {
    let a = c.axis;
    let [p0, p1] = plane_axes(a);
    let rect = [(c.lo[0], c.hi[0]), (c.lo[1], c.hi[1])];
    let mut t = c.level.min(1.0 - c.level);
    for b in geo_boxes {
        if closed_intervals_overlap(rect[0], (b.lo[p0], b.hi[p0])) && closed_intervals_overlap(rect[1], (b.lo[p1], b.hi[p1])) {
            t = t.min(interval_distance(c.level, (b.lo[a], b.hi[a])));
        }
    }
    for (k, d) in cracks.iter().enumerate() {
        if k == me {
            continue;
        }
        // The normal segments through the rectangle sweep the slab rect x R along axis a.
        let hits = closed_intervals_overlap(rect[0], d.extent(p0)) && closed_intervals_overlap(rect[1], d.extent(p1));
        if hits {
            let iv = d.extent(a);
            if d.axis == a && iv.0 == c.level {
                // coplanar and disjoint: never crossed by a normal segment
                continue;
            }
            t = t.min(interval_distance(c.level, iv));
        }
    }
    t
}

pub fn build_unit_cell(spec: &CellSpec) -> Result<CellGeometry> {
    let mut inclusions = Vec::with_capacity(spec.inclusions.len());
    for (i, b) in spec.inclusions.iter().enumerate() {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCell(format!("inclusion {} has non-finite corner", i + 1)));
        }
        let bx = CellBox { lo: [b[0], b[1], b[2]], hi: [b[3], b[4], b[5]] };
        if (0..3).any(|a| bx.lo[a] >= bx.hi[a]) {
            return Err(Error::InvalidCell(format!("inclusion {} is empty", i + 1)));
        }
        inclusions.push(bx);
    }
    let mut cracks = Vec::with_capacity(spec.open_cracks.len());
    for (k, c) in spec.open_cracks.iter().enumerate() {
        if c.axis > 2 {
            return Err(Error::InvalidCell(format!("open crack {k} has axis {} (expected 0..2)", c.axis)));
        }
        let vals = [c.level, c.lo[0], c.lo[1], c.hi[0], c.hi[1]];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCell(format!("open crack {k} has non-finite data")));
        }
        if c.lo[0] >= c.hi[0] || c.lo[1] >= c.hi[1] {
            return Err(Error::InvalidCell(format!("open crack {k} is empty")));
        }
        cracks.push(*c);
    }

    let mut eta = f64::INFINITY;
    for b in &inclusions {
        eta = eta.min(b.boundary_distance());
    }
    for c in &cracks {
        eta = eta.min(c.boundary_distance());
    }
    if eta <= 0.0 {
        return Err(Error::CrackTouchesBoundary);
    }
    for i in 0..inclusions.len() {
        for j in i + 1..inclusions.len() {
            if boxes_closures_meet(&inclusions[i], &inclusions[j]) {
                return Err(Error::InclusionOverlap(i + 1, j + 1));
            }
        }
    }
    for (k, c) in cracks.iter().enumerate() {
        for (i, b) in inclusions.iter().enumerate() {
            if crack_meets_box(c, b) {
                return Err(Error::OpenCrackHitsInclusion { crack: k, inclusion: i + 1 });
            }
        }
        for (l, d) in cracks.iter().enumerate().skip(k + 1) {
            if cracks_meet(c, d) {
                return Err(Error::OpenCracksTouch(k, l));
            }
        }
    }
    let mut t0 = f64::INFINITY;
    for (k, c) in cracks.iter().enumerate() {
        t0 = t0.min(normal_clearance(c, &inclusions, &cracks, k));
    }
    if t0 <= 0.0 {
        return Err(Error::InvalidCell("open crack has zero normal clearance".into()));
    }
    let centers = inclusions.iter().map(CellBox::center).collect();
    Ok(CellGeometry { inclusions, open_cracks: cracks, eta, t0, centers })
}

/// Faces of the lower block that may carry the clamping condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum BlockFace {
    Bottom,
    XMin,
    XMax,
    YMin,
    YMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredDomain {
    pub omega: [f64; 2],
    pub l: f64,
    pub eps: f64,
    /// Whole cells eps(xi + Y') inside omega, in lexicographic (x-major) order.
    pub xi_set: Vec<[usize; 2]>,
    /// Number of whole cells per direction.
    pub cells: [usize; 2],
    /// Area of the boundary remainder not covered by whole cells.
    pub lambda_area: f64,
    pub gamma: Vec<BlockFace>,
}

impl LayeredDomain {
    pub fn covered_area(&self) -> f64 {
        self.xi_set.len() as f64 * self.eps * self.eps
    }

    pub fn is_exact_tiling(&self) -> bool {
        (0..2).all(|k| {
            let r = self.omega[k] / self.eps;
            (r - r.round()).abs() <= TILING_TOL * r.max(1.0)
        })
    }

    /// Cell index of xi in `xi_set` order.
    pub fn cell_index(&self, xi: [usize; 2]) -> usize {
        xi[0] * self.cells[1] + xi[1]
    }
}

/// Number of whole intervals of length `eps` fitting in `w`.
pub fn whole_cells(w: f64, eps: f64) -> usize {
    let r = w / eps;
    let n = (r + TILING_TOL * r.max(1.0)).floor();
    if n < 0.0 {
        0
    } else {
        n as usize
    }
}

pub fn tile_layer(cell: &CellGeometry, omega: [f64; 2], l: f64, eps: f64) -> Result<LayeredDomain> {
    let _ = cell;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidDomain(format!("eps must be positive, got {eps}")));
    }
    if !(omega[0] > 0.0 && omega[1] > 0.0) {
        return Err(Error::InvalidDomain("omega must have positive sides".into()));
    }
    if !(l > eps) {
        return Err(Error::InvalidDomain(format!("block height L = {l} must exceed eps = {eps}")));
    }
    let cells = [whole_cells(omega[0], eps), whole_cells(omega[1], eps)];
    let mut xi_set = Vec::with_capacity(cells[0] * cells[1]);
    for i in 0..cells[0] {
        for j in 0..cells[1] {
            xi_set.push([i, j]);
        }
    }
    if xi_set.is_empty() {
        log::warn!("eps = {eps} admits no whole cell in omega = {omega:?}");
    }
    let covered = xi_set.len() as f64 * eps * eps;
    let mut lambda_area = omega[0] * omega[1] - covered;
    let exact = (0..2).all(|k| {
        let r = omega[k] / eps;
        (r - r.round()).abs() <= TILING_TOL * r.max(1.0)
    });
    if exact || lambda_area.abs() <= 1e-14 * omega[0] * omega[1] {
        lambda_area = 0.0;
    }
    Ok(LayeredDomain { omega, l, eps, xi_set, cells, lambda_area, gamma: vec![BlockFace::Bottom] })
}
