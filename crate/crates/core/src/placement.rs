//! Marker placement: rectangular decomposition of free space, candidate
//! generation, ray-traced coverage and greedy removal of redundant markers.
//!
//! All positions are integer cells. A cell is *free* when it is traversable
//! and not an obstacle; only free cells need coverage and only free cells let
//! a marker see through.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::morphology::distance_transform;
use crate::raster::{for_each_line_cell, BitGrid, Grid};

pub type Cell = (usize, usize);

/// Axis-aligned block of cells `[x0, x0 + w) × [y0, y0 + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    /// Cell containing the geometric centre (rounded down).
    pub fn centroid(&self) -> Cell {
        (self.x0 + (self.w - 1) / 2, self.y0 + (self.h - 1) / 2)
    }

    pub fn corners(&self) -> [Cell; 4] {
        let (x1, y1) = (self.x0 + self.w - 1, self.y0 + self.h - 1);
        [(self.x0, self.y0), (x1, self.y0), (self.x0, y1), (x1, y1)]
    }

    pub fn contains(&self, (x, y): Cell) -> bool {
        x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.y0..self.y0 + self.h).flat_map(move |y| (self.x0..self.x0 + self.w).map(move |x| (x, y)))
    }
}

/// Converts a 0/1 raster into a bit grid, rejecting any other value.
pub fn bits_from_u8(grid: &Grid<u8>) -> Result<BitGrid> {
    if let Some(&bad) = grid.data().iter().find(|&&v| v > 1) {
        return Err(Error::NotBinary(bad));
    }
    Ok(grid.map(|&v| v == 1))
}

/// Free cells: traversable and not an obstacle.
pub fn free_space(obstacles: &BitGrid, traversable: &BitGrid) -> Result<BitGrid> {
    if obstacles.width() != traversable.width() || obstacles.height() != traversable.height() {
        return Err(Error::InvalidArgument("obstacle and traversable masks differ in size".into()));
    }
    Ok(Grid::from_fn(obstacles.width(), obstacles.height(), |x, y| {
        *traversable.get(x, y) && !*obstacles.get(x, y)
    }))
}

/// Left-to-right sweep inside `bounds`: each column is split into maximal
/// vertical runs of `open` cells; a rectangle stays open while the same run
/// continues in the next column and closes when it changes or the area ends.
fn sweep(open: &BitGrid, bounds: Rect) -> Vec<Rect> {
    let mut active: BTreeMap<(usize, usize), usize> = BTreeMap::new(); // (y0, y1) -> x0
    let mut out = Vec::new();
    for x in bounds.x0..=bounds.x0 + bounds.w {
        let mut runs = Vec::new();
        if x < bounds.x0 + bounds.w {
            let mut y = bounds.y0;
            while y < bounds.y0 + bounds.h {
                if *open.get(x, y) {
                    let start = y;
                    while y < bounds.y0 + bounds.h && *open.get(x, y) {
                        y += 1;
                    }
                    runs.push((start, y - 1));
                } else {
                    y += 1;
                }
            }
        }
        let mut next = BTreeMap::new();
        for run in runs {
            let x0 = active.remove(&run).unwrap_or(x);
            next.insert(run, x0);
        }
        for ((y0, y1), x0) in core::mem::take(&mut active) {
            out.push(Rect {
                x0,
                y0,
                w: x - x0,
                h: y1 - y0 + 1,
            });
        }
        active = next;
    }
    out
}

/// Decomposes the space between obstacle boundaries into rectangles, drops
/// rectangles outside the traversable region and trims the rest to it. The
/// rectangles are disjoint and their union is exactly the free cells.
/// Output is sorted by `(y0, x0)`.
pub fn rectangular_decomposition(obstacles: &BitGrid, traversable: &BitGrid) -> Result<Vec<Rect>> {
    let free = free_space(obstacles, traversable)?;
    let open = obstacles.map(|&o| !o);
    let whole = Rect {
        x0: 0,
        y0: 0,
        w: open.width(),
        h: open.height(),
    };
    if whole.area() == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for r in sweep(&open, whole) {
        let inside = r.cells().filter(|&(x, y)| *free.get(x, y)).count();
        if inside == r.area() {
            out.push(r);
        } else if inside > 0 {
            out.extend(sweep(&free, r));
        }
    }
    out.sort_by_key(|r| (r.y0, r.x0, r.h, r.w));
    Ok(out)
}

/// When the corners of a small rectangle join the candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerRule {
    /// Both sides shorter than half the range.
    #[default]
    BothBelowHalf,
    /// Either side shorter than half the range.
    AnyBelowHalf,
    Never,
}

fn split_1d(start: usize, len: usize, range: f64) -> Vec<(usize, usize)> {
    let k = if (len as f64) > range {
        ((len as f64) / range).ceil() as usize
    } else {
        1
    };
    (0..k)
        .map(|i| {
            let a = start + i * len / k;
            let b = start + (i + 1) * len / k;
            (a, b - a)
        })
        .collect()
}

/// Splits rectangles longer than `range` (cells) into near-equal segments no
/// longer than `range`, returning the centroid of every segment plus corners
/// per `corner_rule`. Deduplicated and sorted by `(y, x)`.
pub fn generate_candidates(rects: &[Rect], range: f64, corner_rule: CornerRule) -> Vec<Cell> {
    let mut out = Vec::new();
    for r in rects {
        for &(x0, w) in &split_1d(r.x0, r.w, range) {
            for &(y0, h) in &split_1d(r.y0, r.h, range) {
                let seg = Rect { x0, y0, w, h };
                out.push(seg.centroid());
                let half = range / 2.0;
                let (sw, sh) = (w as f64, h as f64);
                let corners = match corner_rule {
                    CornerRule::BothBelowHalf => sw < half && sh < half,
                    CornerRule::AnyBelowHalf => sw < half || sh < half,
                    CornerRule::Never => false,
                };
                if corners {
                    out.extend(seg.corners());
                }
            }
        }
    }
    out.sort_by_key(|&(x, y)| (y, x));
    out.dedup();
    out
}

/// Free cells visible from `candidate` within Euclidean distance `range`
/// (cells): the discrete line from the candidate to the cell must pass through
/// free cells only. Returns sorted raster indices.
pub fn coverage_raytrace(free: &BitGrid, candidate: Cell, range: f64) -> Result<Vec<usize>> {
    let (cx, cy) = candidate;
    if cx >= free.width() || cy >= free.height() || !*free.get(cx, cy) {
        return Err(Error::CandidateOnObstacle(cx, cy));
    }
    let reach = range.floor().max(0.0) as i64;
    let r2 = range * range;
    let mut out = Vec::new();
    let (ci, cj) = (cx as i64, cy as i64);
    for y in (cj - reach).max(0)..=(cj + reach).min(free.height() as i64 - 1) {
        for x in (ci - reach).max(0)..=(ci + reach).min(free.width() as i64 - 1) {
            let (dx, dy) = ((x - ci) as f64, (y - cj) as f64);
            if dx * dx + dy * dy > r2 || !*free.get(x as usize, y as usize) {
                continue;
            }
            let visible = for_each_line_cell((ci, cj), (x, y), |(lx, ly)| *free.get(lx as usize, ly as usize));
            if visible {
                out.push(free.index(x as usize, y as usize));
            }
        }
    }
    Ok(out)
}

/// Number of free cells covered by at least one mask, and the first
/// uncovered free cell in raster order.
pub fn coverage_of(free: &BitGrid, masks: &[Vec<usize>]) -> (usize, Option<Cell>) {
    let mut hit = vec![false; free.len()];
    for m in masks {
        for &i in m {
            hit[i] = true;
        }
    }
    let mut covered = 0;
    let mut first = None;
    for (i, &f) in free.data().iter().enumerate() {
        if f {
            if hit[i] {
                covered += 1;
            } else if first.is_none() {
                first = Some(free.coords(i));
            }
        }
    }
    (covered, first)
}

/// Result of the reduction: surviving markers in `(y, x)` order with their
/// coverage masks; marker ids are positions in these vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPlacement {
    pub markers: Vec<Cell>,
    pub masks: Vec<Vec<usize>>,
    pub free_cells: usize,
    /// Candidate count before reduction.
    pub candidates: usize,
}

/// Clearance of each candidate (distance to the nearest non-free cell); an
/// all-free raster gives every candidate the same clearance.
pub fn candidate_clearance(free: &BitGrid, candidates: &[Cell]) -> Result<Vec<f64>> {
    match distance_transform(&free.map(|&f| !f)) {
        Ok(d) => Ok(candidates.iter().map(|&(x, y)| *d.get(x, y)).collect()),
        Err(Error::NoObstacles) => Ok(vec![f64::INFINITY; candidates.len()]),
        Err(e) => Err(e),
    }
}

/// Greedy removal of redundant markers.
///
/// Candidates are ordered by clearance, largest first (ties by `(y, x)`).
/// Each round considers every marker whose removal keeps all free cells
/// covered and removes the one that leaves the most overlap behind, i.e. the
/// one with the smallest coverage mask; among equals the one latest in the
/// order goes first. Stops when no marker can be removed.
pub fn reduce_markers(candidates: &[Cell], free: &BitGrid, range: f64) -> Result<ReducedPlacement> {
    let clearance = candidate_clearance(free, candidates)?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        clearance[b]
            .total_cmp(&clearance[a])
            .then((candidates[a].1, candidates[a].0).cmp(&(candidates[b].1, candidates[b].0)))
            .then(a.cmp(&b))
    });
    let sorted: Vec<Cell> = order.iter().map(|&i| candidates[i]).collect();
    let masks: Vec<Vec<usize>> = sorted
        .iter()
        .map(|&c| coverage_raytrace(free, c, range))
        .collect::<Result<_>>()?;

    let free_cells = free.data().iter().filter(|&&f| f).count();
    let (covered, first) = coverage_of(free, &masks);
    if covered < free_cells {
        return Err(Error::Infeasible {
            count: free_cells - covered,
            first: first.unwrap_or((0, 0)),
        });
    }

    // covering[cell] lists the candidates (by sorted position) that see it.
    let mut covering: Vec<Vec<u32>> = vec![Vec::new(); free.len()];
    for (k, m) in masks.iter().enumerate() {
        for &i in m {
            covering[i].push(k as u32);
        }
    }
    let mut alive = vec![true; sorted.len()];
    let mut count: Vec<u32> = covering.iter().map(|c| c.len() as u32).collect();
    // Cells for which a candidate is the only cover.
    let mut sole = vec![0u32; sorted.len()];
    for (i, c) in covering.iter().enumerate() {
        if count[i] == 1 {
            sole[c[0] as usize] += 1;
        }
    }
    loop {
        let mut pick: Option<usize> = None;
        for k in 0..sorted.len() {
            if alive[k] && sole[k] == 0 && pick.is_none_or(|p| masks[k].len() <= masks[p].len()) {
                pick = Some(k);
            }
        }
        let Some(k) = pick else { break };
        alive[k] = false;
        for &i in &masks[k] {
            count[i] -= 1;
            if count[i] == 1 {
                if let Some(&j) = covering[i].iter().find(|&&j| alive[j as usize]) {
                    sole[j as usize] += 1;
                }
            }
        }
    }

    let mut kept: Vec<(Cell, Vec<usize>)> = Vec::new();
    for (k, m) in masks.into_iter().enumerate() {
        if alive[k] {
            kept.push((sorted[k], m));
        }
    }
    kept.sort_by_key(|((x, y), _)| (*y, *x));
    let (markers, masks) = kept.into_iter().unzip();
    Ok(ReducedPlacement {
        markers,
        masks,
        free_cells,
        candidates: candidates.len(),
    })
}

/// Assigns each path cell to the nearest marker whose mask contains it,
/// breaking distance ties by the lower marker id.
pub fn associate_path_points(points: &[Cell], markers: &[Cell], masks: &[Vec<usize>], width: usize) -> Result<Vec<u32>> {
    if markers.len() != masks.len() {
        return Err(Error::InvalidArgument("one mask per marker required".into()));
    }
    points
        .iter()
        .map(|&(px, py)| {
            let idx = py * width + px;
            let mut best: Option<(u64, u32)> = None;
            for (id, (&(mx, my), mask)) in markers.iter().zip(masks).enumerate() {
                if mask.binary_search(&idx).is_err() {
                    continue;
                }
                let d2 = (mx as i64 - px as i64).pow(2) as u64 + (my as i64 - py as i64).pow(2) as u64;
                if best.is_none_or(|(bd, _)| d2 < bd) {
                    best = Some((d2, id as u32));
                }
            }
            best.map(|(_, id)| id).ok_or(Error::CoverageViolation(px, py))
        })
        .collect()
}

/// Summary of a placement's coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub free_cells: usize,
    pub covered_cells: usize,
    pub per_marker: Vec<usize>,
    /// `histogram[k]` = free cells seen by exactly `k` markers.
    pub histogram: Vec<usize>,
}

impl CoverageReport {
    pub fn fraction(&self) -> f64 {
        if self.free_cells == 0 {
            1.0
        } else {
            self.covered_cells as f64 / self.free_cells as f64
        }
    }
}

pub fn coverage_report(free: &BitGrid, masks: &[Vec<usize>]) -> CoverageReport {
    let mut count = vec![0usize; free.len()];
    for m in masks {
        for &i in m {
            count[i] += 1;
        }
    }
    let mut histogram = vec![0usize; masks.len() + 1];
    let mut free_cells = 0;
    for (i, &f) in free.data().iter().enumerate() {
        if f {
            free_cells += 1;
            histogram[count[i]] += 1;
        }
    }
    CoverageReport {
        free_cells,
        covered_cells: free_cells - histogram[0],
        per_marker: masks.iter().map(Vec::len).collect(),
        histogram,
    }
}

/// Whole placement pipeline on a thinned obstacle map.
pub fn place_markers(
    obstacles: &BitGrid,
    traversable: &BitGrid,
    range: f64,
    corner_rule: CornerRule,
) -> Result<ReducedPlacement> {
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::InvalidArgument(format!("marker range must be positive, got {range}")));
    }
    let free = free_space(obstacles, traversable)?;
    if !free.data().iter().any(|&f| f) {
        return Err(Error::NoFreeCells);
    }
    let rects = rectangular_decomposition(obstacles, traversable)?;
    let candidates = generate_candidates(&rects, range, corner_rule);
    reduce_markers(&candidates, &free, range)
}
