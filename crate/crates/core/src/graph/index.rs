//! Uniform-grid spatial index over a fixed point set.

use crate::error::{Error, Result};

/// Upper bound on grid cells per indexed point; the cell size grows to stay
/// under it for sparse, spread-out inputs.
const MAX_CELLS_PER_POINT: f64 = 4.0;

/// Points bucketed into square cells, stored CSR-style. Query results are
/// exact (identical to a linear scan), with ties broken by lowest id.
#[derive(Debug, Clone)]
pub struct GridIndex {
    coords: Vec<[f64; 2]>,
    min: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    ids: Vec<u32>,
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl GridIndex {
    /// Builds the index. `cell_hint` is the preferred cell edge in meters,
    /// usually the largest radius that will be queried.
    pub fn new(coords: Vec<[f64; 2]>, cell_hint: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("cannot index an empty point set"));
        }
        if coords.len() > u32::MAX as usize {
            return Err(Error::invalid("too many points for the spatial index"));
        }
        if let Some(p) = coords.iter().find(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::invalid(format!("non-finite coordinate ({}, {})", p[0], p[1])));
        }
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in &coords {
            for a in 0..2 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        let w = (max[0] - min[0]).max(0.0);
        let h = (max[1] - min[1]).max(0.0);
        let mut cell = if cell_hint.is_finite() && cell_hint > 0.0 { cell_hint } else { 1.0 };
        let budget = (coords.len() as f64 * MAX_CELLS_PER_POINT).max(1.0);
        let cells_for = |c: f64| ((w / c).floor() + 1.0) * ((h / c).floor() + 1.0);
        while cells_for(cell) > budget {
            cell *= 2.0;
        }
        let nx = (w / cell).floor() as usize + 1;
        let ny = (h / cell).floor() as usize + 1;

        let mut index = Self { coords, min, cell, nx, ny, starts: Vec::new(), ids: Vec::new() };
        let mut counts = vec![0u32; nx * ny + 1];
        let cells: Vec<usize> = index.coords.iter().map(|&p| index.cell_of(p)).collect();
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut ids = vec![0u32; index.coords.len()];
        // ids land in ascending order within each cell
        for (id, &c) in cells.iter().enumerate() {
            ids[fill[c] as usize] = id as u32;
            fill[c] += 1;
        }
        index.starts = counts;
        index.ids = ids;
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, id: usize) -> [f64; 2] {
        self.coords[id]
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn cell_xy(&self, p: [f64; 2]) -> (i64, i64) {
        (
            ((p[0] - self.min[0]) / self.cell).floor() as i64,
            ((p[1] - self.min[1]) / self.cell).floor() as i64,
        )
    }

    fn cell_of(&self, p: [f64; 2]) -> usize {
        let (cx, cy) = self.cell_xy(p);
        let cx = cx.clamp(0, self.nx as i64 - 1) as usize;
        let cy = cy.clamp(0, self.ny as i64 - 1) as usize;
        cy * self.nx + cx
    }

    fn bucket(&self, cx: i64, cy: i64) -> &[u32] {
        if cx < 0 || cy < 0 || cx >= self.nx as i64 || cy >= self.ny as i64 {
            return &[];
        }
        let c = cy as usize * self.nx + cx as usize;
        &self.ids[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    /// Id of the closest point; ties go to the lowest id.
    pub fn nearest(&self, q: [f64; 2]) -> usize {
        self.nearest_with_distance(q).0
    }

    /// `(id, distance)` of the closest point.
    pub fn nearest_with_distance(&self, q: [f64; 2]) -> (usize, f64) {
        let (cx, cy) = self.cell_xy(q);
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        // first ring that touches the grid
        let gap_x = (cx - (nx - 1)).max(-cx).max(0);
        let gap_y = (cy - (ny - 1)).max(-cy).max(0);
        let r0 = gap_x.max(gap_y);
        let r_max = cx.abs().max((cx - (nx - 1)).abs()).max(cy.abs()).max((cy - (ny - 1)).abs());
        let mut best = (u32::MAX, f64::INFINITY);
        let consider = |id: u32, best: &mut (u32, f64)| {
            let d = dist2(self.coords[id as usize], q);
            if d < best.1 || (d == best.1 && id < best.0) {
                *best = (id, d);
            }
        };
        let mut r = r0;
        loop {
            if r == 0 {
                for &id in self.bucket(cx, cy) {
                    consider(id, &mut best);
                }
            } else {
                for x in cx - r..=cx + r {
                    for &id in self.bucket(x, cy - r).iter().chain(self.bucket(x, cy + r)) {
                        consider(id, &mut best);
                    }
                }
                for y in cy - r + 1..cy + r {
                    for &id in self.bucket(cx - r, y).iter().chain(self.bucket(cx + r, y)) {
                        consider(id, &mut best);
                    }
                }
            }
            // unexplored cells are at least r cells away from q; one ring of
            // slack absorbs rounding in cell assignment
            let bound = (r - 1).max(0) as f64 * self.cell;
            if best.0 != u32::MAX && bound * bound > best.1 {
                break;
            }
            if r >= r_max {
                break;
            }
            r += 1;
        }
        (best.0 as usize, best.1.sqrt())
    }

    /// Calls `f(id, squared_distance)` for every point within `radius`
    /// (boundary inclusive), in no particular order.
    pub fn for_each_within(&self, q: [f64; 2], radius: f64, mut f: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let (x0, y0) = self.cell_xy([q[0] - radius, q[1] - radius]);
        let (x1, y1) = self.cell_xy([q[0] + radius, q[1] + radius]);
        // one cell of slack absorbs rounding at the query box edges
        let x0 = (x0 - 1).max(0);
        let y0 = (y0 - 1).max(0);
        let x1 = (x1 + 1).min(self.nx as i64 - 1);
        let y1 = (y1 + 1).min(self.ny as i64 - 1);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &id in self.bucket(cx, cy) {
                    let d = dist2(self.coords[id as usize], q);
                    if d <= r2 {
                        f(id as usize, d);
                    }
                }
            }
        }
    }

    /// Ids within `radius` of `q`, ascending.
    pub fn within(&self, q: [f64; 2], radius: f64) -> Result<Vec<usize>> {
        if !(radius >= 0.0) {
            return Err(Error::invalid(format!("radius must be non-negative, got {radius}")));
        }
        let mut out = Vec::new();
        self.for_each_within(q, radius, |id, _| out.push(id));
        out.sort_unstable();
        Ok(out)
    }

    /// Whether any point lies within `radius` of `q`.
    pub fn any_within(&self, q: [f64; 2], radius: f64) -> bool {
        let mut hit = false;
        self.for_each_within(q, radius, |_, _| hit = true);
        hit
    }

    /// Up to `k` closest `(id, distance)` pairs within `radius`, excluding
    /// points at distance zero, ordered by distance then id.
    pub fn k_nearest_within(&self, q: [f64; 2], k: usize, radius: f64) -> Vec<(usize, f64)> {
        let mut found: Vec<(f64, usize)> = Vec::new();
        self.for_each_within(q, radius, |id, d2| {
            if d2 > 0.0 {
                found.push((d2, id));
            }
        });
        found.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(k);
        found.into_iter().map(|(d2, id)| (id, d2.sqrt())).collect()
    }
}
