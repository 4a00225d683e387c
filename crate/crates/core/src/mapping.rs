//! Occupancy mapping with known poses: scan clean-up, a scanner-centred local
//! grid, and log-odds fusion into a global grid.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::morphology::thin;
use crate::raster::{for_each_line_cell, BitGrid, Grid, GridGeometry};
use crate::sim::Scan;

/// Readings are thresholded to this range, metres.
pub const SCAN_CEILING: f64 = 3.5;
/// Cells per metre of all maps.
pub const MAP_RESOLUTION: f64 = 20.0;
pub const DEFAULT_MAP_SIZE: usize = 1000;

pub const UNKNOWN: i8 = -1;
pub const FREE: i8 = 0;
pub const POSSIBLE: i8 = 50;
pub const OCCUPIED: i8 = 100;

/// Scan with every reading finite and within `(0, ceiling]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanScan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub ranges: Vec<f64>,
    pub ceiling: f64,
}

impl CleanScan {
    pub fn bearing(&self, i: usize) -> f64 {
        self.angle_min + self.angle_increment * i as f64
    }
}

/// Clamps long and infinite readings to the ceiling and fills invalid
/// readings (NaN, non-positive, `-inf`) by linear interpolation between the
/// nearest valid neighbours; runs at either end copy the nearest valid value.
pub fn preprocess_scan(raw: &Scan, ceiling: f64) -> Result<CleanScan> {
    if raw.ranges.is_empty() {
        return Err(Error::UnusableScan);
    }
    if !(ceiling > 0.0) || !ceiling.is_finite() {
        return Err(Error::InvalidArgument(format!("scan ceiling must be positive, got {ceiling}")));
    }
    let valid: Vec<Option<f64>> = raw
        .ranges
        .iter()
        .map(|&r| {
            if r == f64::INFINITY || (r.is_finite() && r > ceiling) {
                Some(ceiling)
            } else if r.is_finite() && r > 0.0 {
                Some(r)
            } else {
                None
            }
        })
        .collect();
    let known: Vec<usize> = (0..valid.len()).filter(|&i| valid[i].is_some()).collect();
    let (&first, &last) = match (known.first(), known.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::UnusableScan),
    };
    let mut ranges = Vec::with_capacity(valid.len());
    let mut next = 0usize; // index into `known` of the next valid reading at or after i
    for (i, v) in valid.iter().enumerate() {
        while next < known.len() && known[next] < i {
            next += 1;
        }
        let r = match v {
            Some(r) => *r,
            None if i < first => valid[first].unwrap_or(ceiling),
            None if i > last => valid[last].unwrap_or(ceiling),
            None => {
                let (a, b) = (known[next - 1], known[next]);
                let (ra, rb) = (valid[a].unwrap_or(ceiling), valid[b].unwrap_or(ceiling));
                ra + (rb - ra) * (i - a) as f64 / (b - a) as f64
            }
        };
        ranges.push(r);
    }
    Ok(CleanScan {
        angle_min: raw.angle_min,
        angle_increment: raw.angle_increment,
        ranges,
        ceiling,
    })
}

fn rank(v: i8) -> u8 {
    match v {
        OCCUPIED => 3,
        POSSIBLE => 2,
        FREE => 1,
        _ => 0,
    }
}

/// Writes `v` unless the cell already holds a stronger code
/// (occupied > possible > free > unknown).
fn mark(grid: &mut Grid<i8>, x: i64, y: i64, v: i8) {
    if grid.in_bounds(x, y) {
        let cell = grid.get_mut(x as usize, y as usize);
        if rank(v) > rank(*cell) {
            *cell = v;
        }
    }
}

/// Square grid in the scanner frame; the scanner sits at the centre cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGrid {
    pub cells: Grid<i8>,
    pub resolution: f64,
}

impl LocalGrid {
    pub fn center(&self) -> i64 {
        (self.cells.width() / 2) as i64
    }

    /// Code at a cell offset from the scanner, or unknown outside the grid.
    pub fn at(&self, dx: i64, dy: i64) -> i8 {
        let c = self.center();
        *self.cells.get_i(c + dx, c + dy).unwrap_or(&UNKNOWN)
    }
}

/// Side of the local grid for the given ceiling and resolution (143 for the
/// defaults): room for the longest beam plus the endpoint's neighbours.
pub fn local_grid_size(ceiling: f64, resolution: f64) -> usize {
    2 * ((ceiling * resolution).ceil() as usize + 1) + 1
}

/// Draws a clean scan into a local grid. Cells along each beam are free; the
/// endpoint of a beam shorter than the ceiling is occupied; endpoint
/// neighbours not otherwise observed become possible obstacles. The passes
/// run in that order so the result does not depend on beam order.
pub fn raytrace_local(scan: &CleanScan, resolution: f64) -> LocalGrid {
    let n = local_grid_size(scan.ceiling, resolution);
    let mut cells = Grid::new(n, n, UNKNOWN);
    let c = (n / 2) as i64;
    let mut endpoints = Vec::new();
    for (i, &r) in scan.ranges.iter().enumerate() {
        let (s, co) = scan.bearing(i).sin_cos();
        let end = ((r * resolution * co).round() as i64, (r * resolution * s).round() as i64);
        let hit = r < scan.ceiling;
        for_each_line_cell((0, 0), end, |(x, y)| {
            if !(hit && (x, y) == end) {
                mark(&mut cells, c + x, c + y, FREE);
            }
            true
        });
        if hit {
            endpoints.push(end);
        }
    }
    for &(ex, ey) in &endpoints {
        mark(&mut cells, c + ex, c + ey, OCCUPIED);
    }
    for &(ex, ey) in &endpoints {
        for (dx, dy) in crate::raster::NEIGHBORS8 {
            let (x, y) = (c + ex + dx, c + ey + dy);
            if cells.get_i(x, y) == Some(&UNKNOWN) {
                cells.set(x as usize, y as usize, POSSIBLE);
            }
        }
    }
    LocalGrid { cells, resolution }
}

/// Occupancy probabilities assigned to each local-grid code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub occupied: f64,
    pub possible: f64,
    pub free: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            occupied: 0.7,
            possible: 0.6,
            free: 0.3,
        }
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        for p in [self.occupied, self.possible, self.free] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidArgument(format!("sensor probability {p} not in (0, 1)")));
            }
        }
        Ok(())
    }

    fn log_odds(&self, code: i8) -> Option<f64> {
        match code {
            OCCUPIED => Some(logit(self.occupied)),
            POSSIBLE => Some(logit(self.possible)),
            FREE => Some(logit(self.free)),
            _ => None,
        }
    }
}

/// Global occupancy grid: per-cell log-odds with a 0.5 prior, plus the number
/// of times each cell has been observed.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub geometry: GridGeometry,
    log_odds: Grid<f64>,
    counts: Grid<u32>,
}

impl OccupancyGrid {
    /// Grid of `width × height` cells with the world origin at the centre.
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self> {
        let geometry = GridGeometry::new(resolution, ((width / 2) as f64, (height / 2) as f64))?;
        Self::with_geometry(width, height, geometry)
    }

    pub fn with_geometry(width: usize, height: usize, geometry: GridGeometry) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("grid must be non-empty".into()));
        }
        Ok(Self {
            geometry,
            log_odds: Grid::new(width, height, 0.0),
            counts: Grid::new(width, height, 0),
        })
    }

    pub fn width(&self) -> usize {
        self.counts.width()
    }

    pub fn height(&self) -> usize {
        self.counts.height()
    }

    pub fn log_odds(&self) -> &Grid<f64> {
        &self.log_odds
    }

    pub fn counts(&self) -> &Grid<u32> {
        &self.counts
    }

    pub fn probability(&self, x: usize, y: usize) -> f64 {
        logistic(*self.log_odds.get(x, y))
    }

    /// Cell value: -1 if never observed, else the probability scaled to
    /// `[0, 100]`.
    pub fn value(&self, x: usize, y: usize) -> i8 {
        if *self.counts.get(x, y) == 0 {
            UNKNOWN
        } else {
            (100.0 * self.probability(x, y)).round() as i8
        }
    }

    pub fn values(&self) -> Grid<i8> {
        Grid::from_fn(self.width(), self.height(), |x, y| self.value(x, y))
    }

    /// Applies one observation with occupancy probability `p` to a cell.
    pub fn observe(&mut self, x: usize, y: usize, p: f64) {
        *self.log_odds.get_mut(x, y) += logit(p);
        *self.counts.get_mut(x, y) += 1;
    }

    /// Fuses a local grid taken by a scanner at `scanner` (world pose).
    /// Every global cell hit by at least one local cell is updated once,
    /// with the strongest code that landed on it.
    pub fn fuse(&mut self, local: &LocalGrid, scanner: &Pose2D, model: &SensorModel) -> Result<()> {
        model.validate()?;
        if !scanner.is_finite() {
            return Err(Error::NonFinite("scanner pose"));
        }
        let (px, py) = self.geometry.to_cell(scanner.x, scanner.y);
        if !self.counts.in_bounds(px, py) {
            return Err(Error::OutOfBounds(px, py));
        }
        let c = local.center();
        let scale = 1.0 / local.resolution;
        let mut hits: Vec<(usize, i8)> = Vec::new();
        let lc = &local.cells;
        for ly in 0..lc.height() {
            for lx in 0..lc.width() {
                let code = *lc.get(lx, ly);
                if code == UNKNOWN {
                    continue;
                }
                let (wx, wy) = scanner.transform_point(
                    (lx as i64 - c) as f64 * scale,
                    (ly as i64 - c) as f64 * scale,
                );
                let (gx, gy) = self.geometry.to_cell(wx + 0.5 * scale, wy + 0.5 * scale);
                if self.counts.in_bounds(gx, gy) {
                    hits.push((self.counts.index(gx as usize, gy as usize), code));
                }
            }
        }
        // Strongest code first within each cell, then update each cell once.
        hits.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(rank(b.1).cmp(&rank(a.1))));
        hits.dedup_by_key(|h| h.0);
        for (idx, code) in hits {
            if let Some(l) = model.log_odds(code) {
                self.log_odds.data_mut()[idx] += l;
                self.counts.data_mut()[idx] += 1;
            }
        }
        Ok(())
    }
}

/// Obstacle mask: observed cells at or above `threshold`. Unknown cells are
/// free.
pub fn binarize(values: &Grid<i8>, threshold: i8) -> BitGrid {
    values.map(|&v| v != UNKNOWN && v >= threshold)
}

/// Thresholds the map and thins obstacles to one-cell-wide boundaries.
pub fn binarize_and_thin(values: &Grid<i8>, threshold: i8) -> BitGrid {
    thin(&binarize(values, threshold))
}

/// Occupied-cell centres (world metres) of a binary map.
pub fn obstacle_points(mask: &BitGrid, geometry: &GridGeometry) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if *mask.get(x, y) {
                pts.push(geometry.cell_center(x as f64, y as f64));
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scan(ranges: Vec<f64>) -> Scan {
        Scan {
            angle_min: 0.0,
            angle_increment: 0.1,
            ranges,
        }
    }

    #[test]
    fn preprocess_examples() {
        let c = preprocess_scan(&scan(vec![2.0, f64::NAN, 3.0]), SCAN_CEILING).unwrap();
        assert_eq!(c.ranges, vec![2.0, 2.5, 3.0]);
        let c = preprocess_scan(&scan(vec![f64::INFINITY, 1.0]), SCAN_CEILING).unwrap();
        assert_eq!(c.ranges, vec![3.5, 1.0]);
        let raw = vec![0.5, 1.25, 3.0];
        assert_eq!(preprocess_scan(&scan(raw.clone()), SCAN_CEILING).unwrap().ranges, raw);
        let c = preprocess_scan(&scan(vec![f64::NAN, 1.0, f64::NAN, f64::NAN, 2.5, f64::NAN]), SCAN_CEILING).unwrap();
        assert_eq!(c.ranges, vec![1.0, 1.0, 1.5, 2.0, 2.5, 2.5]);
        assert_eq!(preprocess_scan(&scan(vec![f64::NAN; 4]), SCAN_CEILING), Err(Error::UnusableScan));
        assert_eq!(preprocess_scan(&scan(vec![]), SCAN_CEILING), Err(Error::UnusableScan));
    }

    fn one_beam(r: f64) -> CleanScan {
        CleanScan {
            angle_min: 0.0,
            angle_increment: 0.0,
            ranges: vec![r],
            ceiling: SCAN_CEILING,
        }
    }

    #[test]
    fn local_grid_single_beam() {
        let g = raytrace_local(&one_beam(0.25), MAP_RESOLUTION);
        assert_eq!(g.cells.width(), 143);
        for x in 0..5 {
            assert_eq!(g.at(x, 0), FREE);
        }
        assert_eq!(g.at(5, 0), OCCUPIED);
        for (dx, dy) in crate::raster::NEIGHBORS8 {
            if (dx, dy) != (-1, 0) {
                assert_eq!(g.at(5 + dx, dy), POSSIBLE);
            }
        }
        assert_eq!(g.at(0, 1), UNKNOWN);
    }

    #[test]
    fn ceiling_beam_has_no_endpoint() {
        let g = raytrace_local(&one_beam(SCAN_CEILING), MAP_RESOLUTION);
        for x in 0..=70 {
            assert_eq!(g.at(x, 0), FREE);
        }
        assert!(g.cells.data().iter().all(|&v| v == FREE || v == UNKNOWN));
        let empty = CleanScan {
            ranges: vec![],
            ..one_beam(1.0)
        };
        assert!(raytrace_local(&empty, MAP_RESOLUTION).cells.data().iter().all(|&v| v == UNKNOWN));
    }

    #[test]
    fn odds_product_example() {
        let mut g = OccupancyGrid::new(4, 4, 20.0).unwrap();
        g.observe(1, 1, 0.9);
        g.observe(1, 1, 0.9);
        assert!((g.probability(1, 1) - 81.0 / 82.0).abs() < 1e-12);
        g.observe(2, 2, 0.5);
        assert_eq!(g.probability(2, 2), 0.5);
        assert_eq!(g.value(2, 2), 50);
        assert_eq!(g.value(0, 0), UNKNOWN);
    }

    #[test]
    fn fuse_places_endpoint_in_world() {
        let mut g = OccupancyGrid::new(200, 200, 20.0).unwrap();
        let local = raytrace_local(&one_beam(1.0), 20.0);
        let pose = Pose2D::new(1.0, 0.5, core::f64::consts::FRAC_PI_2);
        g.fuse(&local, &pose, &SensorModel::default()).unwrap();
        // Endpoint 1 m along +y from (1.0, 0.5).
        let (cx, cy) = g.geometry.to_cell(1.0, 1.5);
        assert_eq!(g.value(cx as usize, cy as usize), 70);
        let (fx, fy) = g.geometry.to_cell(1.0, 1.0);
        assert_eq!(g.value(fx as usize, fy as usize), 30);
        let far = Pose2D::new(100.0, 0.0, 0.0);
        assert!(matches!(g.fuse(&local, &far, &SensorModel::default()), Err(Error::OutOfBounds(..))));
    }

    #[test]
    fn threshold_is_inclusive() {
        let v = Grid::from_vec(4, 1, vec![50, 49, -1, 100]).unwrap();
        assert_eq!(binarize(&v, 50).data(), &[true, false, false, true]);
        let free = Grid::new(5, 5, 0i8);
        assert!(binarize_and_thin(&free, 50).data().iter().all(|&b| !b));
    }
}
