//! Path planning on the medial skeleton of free space: clearance map,
//! ridge-preserving homotopic thinning, a weighted cell graph and Dijkstra.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::f64::consts::SQRT_2;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::morphology::{distance_transform, is_simple, label_components, neighborhood};
use crate::raster::{for_each_line_cell, BitGrid, Grid, GridGeometry};

pub type Cell = (usize, usize);

/// Euclidean distance (cells) from each cell to the nearest non-free cell.
pub fn clearance_map(free: &BitGrid) -> Result<Grid<f64>> {
    distance_transform(&free.map(|&f| !f))
}

/// Non-negative float key usable in integer orderings.
#[inline]
fn key(v: f64) -> u64 {
    v.max(0.0).to_bits()
}

/// A cell lies on a clearance ridge if, along at least one of the four line
/// directions through it, neither neighbour has more clearance and at least
/// one has strictly less. Cells outside the raster count as clearance 0.
pub fn is_ridge(clearance: &Grid<f64>, x: usize, y: usize) -> bool {
    let c = *clearance.get(x, y);
    if c <= 0.0 {
        return false;
    }
    let at = |dx: i64, dy: i64| *clearance.get_i(x as i64 + dx, y as i64 + dy).unwrap_or(&0.0);
    [(1, 0), (0, 1), (1, 1), (1, -1)].iter().any(|&(dx, dy)| {
        let (a, b) = (at(dx, dy), at(-dx, -dy));
        c >= a && c >= b && (c > a || c > b)
    })
}

fn is_endpoint(set: &BitGrid, x: usize, y: usize) -> bool {
    neighborhood(set, x, y).iter().filter(|&&n| n).count() == 1
}

/// Thins free space to a one-cell-wide skeleton along the clearance ridges.
///
/// First, free cells that are simple and not on a ridge are peeled off in
/// ascending order of clearance. The remaining ridge bands are then thinned
/// by removing simple cells that are not curve ends, again lowest clearance
/// first. Only simple cells are ever removed, so every 8-connected component
/// of free space keeps exactly one skeleton component.
pub fn voronoi_skeleton(free: &BitGrid, clearance: &Grid<f64>) -> BitGrid {
    let mut set = Grid::from_fn(free.width(), free.height(), |x, y| *free.get(x, y) && *clearance.get(x, y) > 0.0);
    let ridge = Grid::from_fn(free.width(), free.height(), |x, y| *set.get(x, y) && is_ridge(clearance, x, y));
    peel(&mut set, clearance, |s, x, y| !*ridge.get(x, y) && is_simple(s, x, y));
    peel(&mut set, clearance, |s, x, y| !is_endpoint(s, x, y) && is_simple(s, x, y));
    set
}

/// Removes cells satisfying `removable` in ascending `(clearance, y, x)`
/// order, revisiting the neighbours of every removed cell.
fn peel(set: &mut BitGrid, clearance: &Grid<f64>, removable: impl Fn(&BitGrid, usize, usize) -> bool) {
    let mut heap = BinaryHeap::new();
    let mut queued = BitGrid::new(set.width(), set.height(), false);
    for y in 0..set.height() {
        for x in 0..set.width() {
            if *set.get(x, y) {
                heap.push(Reverse((key(*clearance.get(x, y)), y, x)));
                queued.set(x, y, true);
            }
        }
    }
    while let Some(Reverse((_, y, x))) = heap.pop() {
        queued.set(x, y, false);
        if !*set.get(x, y) || !removable(set, x, y) {
            continue;
        }
        set.set(x, y, false);
        let neighbours: Vec<Cell> = set.neighbors8(x, y).collect();
        for (nx, ny) in neighbours {
            if *set.get(nx, ny) && !*queued.get(nx, ny) {
                heap.push(Reverse((key(*clearance.get(nx, ny)), ny, nx)));
                queued.set(nx, ny, true);
            }
        }
    }
}

/// Undirected weighted graph in adjacency-list form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Graph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, node).
        other.dist.total_cmp(&self.dist).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Graph {
    pub fn with_nodes(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn add_edge(&mut self, a: usize, b: usize, weight: f64) -> Result<()> {
        if a >= self.node_count() || b >= self.node_count() {
            return Err(Error::InvalidArgument("edge endpoint out of range".into()));
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::InvalidArgument("edge weight must be positive".into()));
        }
        self.adjacency[a].push((b, weight));
        self.adjacency[b].push((a, weight));
        Ok(())
    }

    pub fn neighbors(&self, n: usize) -> &[(usize, f64)] {
        &self.adjacency[n]
    }

    /// Shortest path from `src` to `dst`: total weight and node sequence.
    /// Ties between equal-cost routes resolve towards lower node ids.
    pub fn shortest_path(&self, src: usize, dst: usize) -> Result<(f64, Vec<usize>)> {
        let n = self.node_count();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if src >= n || dst >= n {
            return Err(Error::InvalidArgument("path endpoint out of range".into()));
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: src });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if done[node] {
                continue;
            }
            done[node] = true;
            if node == dst {
                break;
            }
            for &(next, w) in &self.adjacency[node] {
                let nd = d + w;
                if nd < dist[next] {
                    dist[next] = nd;
                    prev[next] = node;
                    heap.push(HeapEntry { dist: nd, node: next });
                }
            }
        }
        if !dist[dst].is_finite() {
            return Err(Error::NoPath);
        }
        let mut path = vec![dst];
        while *path.last().unwrap_or(&src) != src {
            path.push(prev[path[path.len() - 1]]);
        }
        path.reverse();
        Ok((dist[dst], path))
    }
}

/// Skeleton cells joined to their 8-neighbours (weights 1 or √2 cells).
/// Nodes are numbered in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiGraph {
    pub graph: Graph,
    pub cells: Vec<Cell>,
    index: BTreeMap<Cell, usize>,
    pub width: usize,
    pub height: usize,
}

impl VoronoiGraph {
    pub fn from_skeleton(skeleton: &BitGrid) -> Self {
        let mut cells = Vec::new();
        let mut index = BTreeMap::new();
        for y in 0..skeleton.height() {
            for x in 0..skeleton.width() {
                if *skeleton.get(x, y) {
                    index.insert((x, y), cells.len());
                    cells.push((x, y));
                }
            }
        }
        let mut graph = Graph::with_nodes(cells.len());
        for (i, &(x, y)) in cells.iter().enumerate() {
            // Forward half-neighbourhood so each edge is added once.
            for (dx, dy, w) in [(1i64, 0i64, 1.0), (-1, 1, SQRT_2), (0, 1, 1.0), (1, 1, SQRT_2)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 {
                    continue;
                }
                if let Some(&j) = index.get(&(nx as usize, ny as usize)) {
                    graph.adjacency[i].push((j, w));
                    graph.adjacency[j].push((i, w));
                }
            }
        }
        Self {
            graph,
            cells,
            index,
            width: skeleton.width(),
            height: skeleton.height(),
        }
    }

    pub fn node_at(&self, cell: Cell) -> Option<usize> {
        self.index.get(&cell).copied()
    }

    /// Node nearest to a cell (Euclidean), ties by lowest `(y, x)`.
    pub fn nearest_node(&self, (x, y): Cell) -> Option<usize> {
        let d2 = |&(cx, cy): &Cell| (cx as i64 - x as i64).pow(2) + (cy as i64 - y as i64).pow(2);
        // Cells are in raster order, so the first minimum has the lowest (y, x).
        (0..self.cells.len()).min_by_key(|&i| d2(&self.cells[i]))
    }

    /// Nearest node among those accepted by `keep`, same ordering as
    /// [`VoronoiGraph::nearest_node`].
    pub fn nearest_node_where(&self, (x, y): Cell, mut keep: impl FnMut(Cell) -> bool) -> Option<usize> {
        let d2 = |&(cx, cy): &Cell| (cx as i64 - x as i64).pow(2) + (cy as i64 - y as i64).pow(2);
        (0..self.cells.len())
            .filter(|&i| keep(self.cells[i]))
            .min_by_key(|&i| d2(&self.cells[i]))
    }
}

/// Snaps a free cell onto the graph: the nearest node in straight free line
/// of sight, else the nearest node in the same free component.
fn snap(graph: &VoronoiGraph, free: &BitGrid, labels: &Grid<u32>, cell: Cell) -> Option<usize> {
    let label = *labels.get(cell.0, cell.1);
    let same = |c: Cell| *labels.get(c.0, c.1) == label;
    let visible = |c: Cell| {
        same(c)
            && for_each_line_cell((cell.0 as i64, cell.1 as i64), (c.0 as i64, c.1 as i64), |(x, y)| {
                *free.get(x as usize, y as usize)
            })
    };
    graph.nearest_node_where(cell, visible).or_else(|| graph.nearest_node_where(cell, same))
}

/// Ordered waypoints from source to destination.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    pub waypoints: Vec<Pose2D>,
    /// Every skeleton cell along the route.
    pub cells: Vec<Cell>,
    /// Metres.
    pub length: f64,
}

/// Keeps the first and last cells and every cell where the step direction
/// changes.
pub fn simplify_collinear(cells: &[Cell]) -> Vec<Cell> {
    if cells.len() <= 2 {
        return cells.to_vec();
    }
    let step = |a: Cell, b: Cell| (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64);
    let mut out = vec![cells[0]];
    for i in 1..cells.len() - 1 {
        if step(cells[i - 1], cells[i]) != step(cells[i], cells[i + 1]) {
            out.push(cells[i]);
        }
    }
    out.push(cells[cells.len() - 1]);
    out
}

/// Plans from `src` to `dst` (world poses) over the skeleton graph. Both
/// endpoints must be on free cells and are snapped to their nearest skeleton
/// nodes. Waypoints face their successor; the last takes `dst`'s heading.
pub fn plan_path(
    graph: &VoronoiGraph,
    free: &BitGrid,
    geometry: &GridGeometry,
    src: &Pose2D,
    dst: &Pose2D,
) -> Result<PathPlan> {
    if graph.cells.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let to_free_cell = |p: &Pose2D| -> Result<Cell> {
        let (cx, cy) = geometry.to_cell(p.x, p.y);
        match free.get_i(cx, cy) {
            Some(true) if p.is_finite() => Ok((cx as usize, cy as usize)),
            _ => Err(Error::InvalidEndpoint { x: p.x, y: p.y }),
        }
    };
    let (labels, _) = label_components(free);
    let s = snap(graph, free, &labels, to_free_cell(src)?).ok_or(Error::NoPath)?;
    let d = snap(graph, free, &labels, to_free_cell(dst)?).ok_or(Error::NoPath)?;
    let (cost, nodes) = graph.graph.shortest_path(s, d)?;
    let cells: Vec<Cell> = nodes.iter().map(|&n| graph.cells[n]).collect();
    let corners = simplify_collinear(&cells);
    let centre = |c: Cell| geometry.cell_center(c.0 as f64, c.1 as f64);
    let mut waypoints = Vec::with_capacity(corners.len());
    for (i, &c) in corners.iter().enumerate() {
        let (x, y) = centre(c);
        let heading = match corners.get(i + 1) {
            Some(&n) => {
                let (nx, ny) = centre(n);
                (ny - y).atan2(nx - x)
            }
            None => dst.theta,
        };
        waypoints.push(Pose2D::new(x, y, heading));
    }
    Ok(PathPlan {
        waypoints,
        cells,
        length: cost / geometry.resolution,
    })
}

/// Clearance, skeleton and graph for a free-space mask.
pub fn build_roadmap(free: &BitGrid) -> Result<(Grid<f64>, BitGrid, VoronoiGraph)> {
    let clearance = clearance_map(free)?;
    let skeleton = voronoi_skeleton(free, &clearance);
    let graph = VoronoiGraph::from_skeleton(&skeleton);
    Ok((clearance, skeleton, graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::count_components;

    fn corridor(len: usize, width: usize) -> BitGrid {
        Grid::from_fn(len + 2, width + 2, |x, y| x > 0 && y > 0 && x <= len && y <= width)
    }

    #[test]
    fn corridor_skeleton_is_centreline() {
        let free = corridor(60, 21);
        let c = clearance_map(&free).unwrap();
        assert_eq!(*c.get(30, 11), 11.0);
        let sk = voronoi_skeleton(&free, &c);
        for x in 15..45 {
            let col: Vec<usize> = (0..23).filter(|&y| *sk.get(x, y)).collect();
            assert_eq!(col, vec![11], "column {x}");
        }
        assert_eq!(count_components(&sk), 1);
    }

    #[test]
    fn plus_junction_on_skeleton() {
        let free = Grid::from_fn(61, 61, |x, y| (25..36).contains(&x) && (1..60).contains(&y) || (25..36).contains(&y) && (1..60).contains(&x));
        let (_, sk, _) = build_roadmap(&free).unwrap();
        assert!(*sk.get(30, 30));
        assert_eq!(count_components(&sk), 1);
    }

    #[test]
    fn components_preserved() {
        let mut free = corridor(40, 9);
        for y in 0..11 {
            free.set(20, y, false);
        }
        let (_, sk, _) = build_roadmap(&free).unwrap();
        assert_eq!(count_components(&sk), 2);
    }

    #[test]
    fn dijkstra_small() {
        let mut g = Graph::with_nodes(4);
        g.add_edge(0, 1, 1.0).unwrap();
        g.add_edge(1, 3, 1.0).unwrap();
        g.add_edge(0, 2, 1.0).unwrap();
        g.add_edge(2, 3, 1.0).unwrap();
        let (d, p) = g.shortest_path(0, 3).unwrap();
        assert_eq!(d, 2.0);
        assert_eq!(p, vec![0, 1, 3]);
        assert_eq!(g.shortest_path(2, 2).unwrap(), (0.0, vec![2]));
        let mut h = Graph::with_nodes(2);
        assert_eq!(h.shortest_path(0, 1), Err(Error::NoPath));
        assert!(h.add_edge(0, 1, 0.0).is_err());
        assert_eq!(Graph::default().shortest_path(0, 0), Err(Error::EmptyGraph));
    }

    #[test]
    fn corridor_plan() {
        let free = corridor(100, 11);
        let geo = GridGeometry::new(20.0, (0.0, 0.0)).unwrap();
        let (_, _, g) = build_roadmap(&free).unwrap();
        let src = Pose2D::new(0.5, 0.3, 0.0);
        let dst = Pose2D::new(4.5, 0.3, 1.0);
        let plan = plan_path(&g, &free, &geo, &src, &dst).unwrap();
        assert!((plan.length - 4.0).abs() <= 1.0 / 20.0 + 1e-9);
        assert_eq!(plan.waypoints.len(), 2);
        assert_eq!(plan.waypoints[0].theta, 0.0);
        assert_eq!(plan.waypoints[1].theta, 1.0);
        let same = plan_path(&g, &free, &geo, &src, &src).unwrap();
        assert_eq!(same.waypoints.len(), 1);
        assert_eq!(same.length, 0.0);
        let wall = Pose2D::new(0.01, 0.01, 0.0);
        assert!(matches!(plan_path(&g, &free, &geo, &wall, &dst), Err(Error::InvalidEndpoint { .. })));
    }

    #[test]
    fn collinear_runs_collapse() {
        let cells = vec![(0, 0), (1, 0), (2, 0), (3, 1), (4, 2), (4, 3)];
        assert_eq!(simplify_collinear(&cells), vec![(0, 0), (2, 0), (4, 2), (4, 3)]);
    }
}
