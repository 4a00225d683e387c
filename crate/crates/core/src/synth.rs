//! Synthetic environments: thin-walled worlds for the simulator, corridor
//! networks and random orthogonal maps for placement and planning.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::Result;
use crate::geometry::{Marker, MarkerDatabase, Pose2D};
use crate::raster::{BitGrid, Grid, GridGeometry};
use crate::sim::{seeded_rng, World};

/// Edge length of the cuboid markers used by the built-in worlds.
pub const MARKER_SIZE: f64 = 0.2;

/// Paints one-cell walls onto an initially empty raster addressed in metres.
#[derive(Debug, Clone)]
pub struct Sketch {
    pub geometry: GridGeometry,
    pub obstacles: BitGrid,
}

impl Sketch {
    /// Raster covering `[-margin, width + margin] × [-margin, height + margin]`.
    pub fn new(width: f64, height: f64, margin: f64, resolution: f64) -> Result<Self> {
        let m = (margin * resolution).round();
        let geometry = GridGeometry::new(resolution, (m, m))?;
        let w = (width * resolution).round() as usize + 2 * m as usize;
        let h = (height * resolution).round() as usize + 2 * m as usize;
        Ok(Self {
            geometry,
            obstacles: BitGrid::new(w, h, false),
        })
    }

    fn cell(&self, x: f64, y: f64) -> (i64, i64) {
        let (cx, cy) = self.geometry.to_cell_f(x, y);
        (cx.round() as i64, cy.round() as i64)
    }

    fn paint(&mut self, x0: i64, y0: i64, x1: i64, y1: i64) {
        for y in y0.min(y1)..=y0.max(y1) {
            for x in x0.min(x1)..=x0.max(x1) {
                if self.obstacles.in_bounds(x, y) {
                    self.obstacles.set(x as usize, y as usize, true);
                }
            }
        }
    }

    /// Ring of wall cells just outside the free box `[x0, x1) × [y0, y1)`.
    pub fn room(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let (a, b) = (self.cell(x0, y0), self.cell(x1, y1));
        let (ax, ay, bx, by) = (a.0 - 1, a.1 - 1, b.0, b.1);
        self.paint(ax, ay, bx, ay);
        self.paint(ax, by, bx, by);
        self.paint(ax, ay, ax, by);
        self.paint(bx, ay, bx, by);
    }

    /// Ring of wall cells on the boundary of the box `[x0, x1) × [y0, y1)`.
    pub fn block(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let (a, b) = (self.cell(x0, y0), self.cell(x1, y1));
        let (bx, by) = (b.0 - 1, b.1 - 1);
        self.paint(a.0, a.1, bx, a.1);
        self.paint(a.0, by, bx, by);
        self.paint(a.0, a.1, a.0, by);
        self.paint(bx, a.1, bx, by);
    }

    /// Straight axis-aligned wall one cell thick starting at `(x0, y0)`.
    pub fn wall(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        let (a, b) = (self.cell(x0, y0), self.cell(x1, y1));
        self.paint(a.0, a.1, b.0, b.1);
    }

    pub fn into_world(self, markers: &[(f64, f64)]) -> Result<World> {
        let db = MarkerDatabase::new(
            markers
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| Marker::new(i as u32, Pose2D::new(x, y, 0.0), 4, MARKER_SIZE))
                .collect::<Result<Vec<_>>>()?,
        )?;
        World::new(self.obstacles, self.geometry, db)
    }
}

/// A simulated world plus a scripted route through it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub world: World,
    /// Route vertices (metres). The first vertex is the start.
    pub route: Vec<(f64, f64)>,
    /// Marker whose pose anchors the map frame.
    pub anchor: u32,
}

/// Straight 12 m corridor, 2.15 m wide, with markers every 4 m along one
/// side and a single pass along the other.
pub fn corridor_scene() -> Result<Scene> {
    let mut s = Sketch::new(12.0, 2.15, 0.5, 20.0)?;
    s.room(0.0, 0.0, 12.0, 2.15);
    let world = s.into_world(&[(1.0, 1.6), (5.0, 1.6), (9.0, 1.6), (11.5, 1.6)])?;
    Ok(Scene {
        world,
        route: alloc::vec![(0.5, 0.7), (11.5, 0.7)],
        anchor: 0,
    })
}

/// 8 m × 6 m room with a partial partition and two boxes.
pub fn lab_scene() -> Result<Scene> {
    let mut s = Sketch::new(8.0, 6.0, 0.5, 20.0)?;
    s.room(0.0, 0.0, 8.0, 6.0);
    s.wall(4.0, 0.0, 4.0, 3.5);
    s.block(1.2, 3.8, 2.2, 4.4);
    s.block(5.2, 2.0, 6.2, 2.8);
    let world = s.into_world(&[(2.0, 2.2), (3.4, 4.6), (6.0, 4.4), (6.8, 1.4), (5.0, 0.4)])?;
    Ok(Scene {
        world,
        route: alloc::vec![(1.0, 0.8), (3.2, 0.8), (3.2, 5.0), (7.2, 5.0), (7.2, 0.8), (4.8, 0.8)],
        anchor: 0,
    })
}

/// 6 m × 5 m room for a closed three-waypoint loop.
pub fn loop_scene() -> Result<Scene> {
    let mut s = Sketch::new(6.0, 5.0, 0.5, 20.0)?;
    s.room(0.0, 0.0, 6.0, 5.0);
    let world = s.into_world(&[(2.5, 2.0), (3.5, 2.0)])?;
    Ok(Scene {
        world,
        route: alloc::vec![(1.0, 1.0), (5.0, 1.0), (3.0, 4.0), (1.0, 1.0)],
        anchor: 0,
    })
}

/// 5 m × 2 m room with a marker near each end; the route is a straight 4 m
/// run between them.
pub fn straight_scene() -> Result<Scene> {
    let mut s = Sketch::new(5.0, 2.0, 0.5, 20.0)?;
    s.room(0.0, 0.0, 5.0, 2.0);
    let world = s.into_world(&[(0.3, 1.6), (4.7, 1.6)])?;
    Ok(Scene {
        world,
        route: alloc::vec![(0.5, 0.6), (4.5, 0.6)],
        anchor: 0,
    })
}

/// Obstacle raster (`true` = obstacle) of a corridor network: every cell
/// within the axis-aligned strips of `width` cells centred on the polyline
/// is free, everything else is obstacle. A one-cell obstacle border is kept.
pub fn corridor_network(vertices: &[(usize, usize)], width: usize) -> BitGrid {
    let lo = width / 2;
    let hi = width - lo;
    let max_x = vertices.iter().map(|v| v.0).max().unwrap_or(0) + hi + 2;
    let max_y = vertices.iter().map(|v| v.1).max().unwrap_or(0) + hi + 2;
    let mut g = BitGrid::new(max_x, max_y, true);
    for seg in vertices.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let (x0, x1) = (a.0.min(b.0), a.0.max(b.0));
        let (y0, y1) = (a.1.min(b.1), a.1.max(b.1));
        for y in (y0 + 1).saturating_sub(lo).max(1)..(y1 + 1 + hi).min(max_y - 1) {
            for x in (x0 + 1).saturating_sub(lo).max(1)..(x1 + 1 + hi).min(max_x - 1) {
                g.set(x, y, false);
            }
        }
    }
    g
}

/// Width in cells of the synthetic placement corridor (2.15 m).
pub const CORRIDOR_WIDTH: usize = 43;

/// Switchback corridor: `legs` horizontal legs of `leg` cells, alternating
/// direction, joined at alternate ends by vertical connectors rising `rise`
/// cells. Every strip is [`CORRIDOR_WIDTH`] cells wide.
pub fn serpentine_corridor(legs: usize, leg: usize, rise: usize) -> BitGrid {
    let half = CORRIDOR_WIDTH / 2 + 1;
    let (mut x, mut y) = (half, half);
    let mut v = alloc::vec![(x, y)];
    for i in 0..legs {
        x = if i % 2 == 0 { x + leg } else { x - leg };
        v.push((x, y));
        if i + 1 < legs {
            y += rise;
            v.push((x, y));
        }
    }
    corridor_network(&v, CORRIDOR_WIDTH)
}

/// The corridor used for the count-versus-range curve: four 4 m legs joined
/// by 2.5 m connectors.
pub fn placement_corridor() -> BitGrid {
    serpentine_corridor(4, 80, 50)
}

/// Random orthogonal map: a bordered room with axis-aligned rectangular
/// obstacles. The returned grid always has free cells.
pub fn random_orthogonal_map(seed: u64, width: usize, height: usize, blocks: usize) -> BitGrid {
    let mut rng = seeded_rng(seed);
    let mut g = Grid::from_fn(width, height, |x, y| x == 0 || y == 0 || x + 1 == width || y + 1 == height);
    for _ in 0..blocks {
        let w = rng.random_range(2..=(width / 3).max(2));
        let h = rng.random_range(2..=(height / 3).max(2));
        let x0 = rng.random_range(1..width.saturating_sub(w).max(2));
        let y0 = rng.random_range(1..height.saturating_sub(h).max(2));
        for y in y0..(y0 + h).min(height - 1) {
            for x in x0..(x0 + w).min(width - 1) {
                g.set(x, y, true);
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_build() {
        for scene in [corridor_scene(), lab_scene(), loop_scene(), straight_scene()] {
            let scene = scene.unwrap();
            for &(x, y) in &scene.route {
                assert!(scene.world.is_free(x, y), "route vertex ({x}, {y})");
            }
        }
    }

    #[test]
    fn corridor_width() {
        let scene = corridor_scene().unwrap();
        let g = &scene.world.obstacles;
        let col = g.width() / 2;
        let free = (0..g.height()).filter(|&y| !*g.get(col, y)).count();
        // Interior plus the unused margin outside the two walls.
        let walls: Vec<usize> = (0..g.height()).filter(|&y| *g.get(col, y)).collect();
        assert_eq!(walls.len(), 2);
        assert_eq!(walls[1] - walls[0] - 1, 43);
        assert!(free > 43);
    }

    #[test]
    fn serpentine_is_connected_strip() {
        let g = serpentine_corridor(3, 60, 50);
        let free = g.map(|&o| !o);
        assert_eq!(crate::morphology::count_components(&free), 1);
        // A vertical cut clear of the connectors crosses each leg once.
        let col = 60;
        assert_eq!((0..g.height()).filter(|&y| !*g.get(col, y)).count(), 3 * CORRIDOR_WIDTH);
    }

    #[test]
    fn random_maps_are_deterministic() {
        assert_eq!(random_orthogonal_map(3, 40, 30, 5), random_orthogonal_map(3, 40, 30, 5));
        assert!(random_orthogonal_map(3, 40, 30, 5).data().iter().any(|&o| !o));
    }
}
