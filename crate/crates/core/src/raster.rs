//! Dense row-major rasters plus the discrete line and ray traversals shared by
//! the simulator, the mapper and the placement coverage model.
//!
//! Cell `(cx, cy)` covers world `x ∈ [(cx - ox)/res, (cx + 1 - ox)/res)` and
//! likewise for `y`, where `(ox, oy)` is the cell coordinate of the world
//! origin. Row index grows with world `y`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Metric placement of a raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    /// Cells per metre.
    pub resolution: f64,
    /// Cell coordinates of the world origin.
    pub origin: (f64, f64),
}

impl GridGeometry {
    pub fn new(resolution: f64, origin: (f64, f64)) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self { resolution, origin })
    }

    /// Continuous cell coordinates of a world point.
    #[inline]
    pub fn to_cell_f(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.resolution + self.origin.0, y * self.resolution + self.origin.1)
    }

    /// Integer cell containing a world point (may be outside any grid).
    #[inline]
    pub fn to_cell(&self, x: f64, y: f64) -> (i64, i64) {
        let (cx, cy) = self.to_cell_f(x, y);
        (cx.floor() as i64, cy.floor() as i64)
    }

    /// World coordinates of a cell centre.
    #[inline]
    pub fn cell_center(&self, cx: f64, cy: f64) -> (f64, f64) {
        (
            (cx + 0.5 - self.origin.0) / self.resolution,
            (cy + 0.5 - self.origin.1) / self.resolution,
        )
    }

    pub fn metres_to_cells(&self, m: f64) -> f64 {
        m * self.resolution
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidArgument(alloc::format!(
                "grid data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_i(&self, x: i64, y: i64) -> Option<&T> {
        if self.in_bounds(x, y) {
            Some(&self.data[y as usize * self.width + x as usize])
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = self.index(x, y);
        self.data[i] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// In-bounds 8-neighbours of `(x, y)`, in a fixed order.
    pub fn neighbors8(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        NEIGHBORS8.iter().filter_map(move |&(dx, dy)| {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            self.in_bounds(nx, ny).then_some((nx as usize, ny as usize))
        })
    }
}

/// Boolean raster.
pub type BitGrid = Grid<bool>;

/// 8-neighbourhood offsets, anticlockwise starting east.
pub const NEIGHBORS8: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Integer line between two cells (Bresenham), endpoints included, starting
/// at `from`.
pub fn line(from: (i64, i64), to: (i64, i64)) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for_each_line_cell(from, to, |c| {
        out.push(c);
        true
    });
    out
}

/// Visits the Bresenham cells from `from` to `to`; stops early when `f`
/// returns `false`. Returns whether the walk completed.
pub fn for_each_line_cell(
    from: (i64, i64),
    to: (i64, i64),
    mut f: impl FnMut((i64, i64)) -> bool,
) -> bool {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if !f((x, y)) {
            return false;
        }
        if x == to.0 && y == to.1 {
            return true;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Casts a ray through the raster using exact grid traversal (Amanatides &
/// Woo). Coordinates are continuous cell units. Returns the distance (cells)
/// at which the ray enters the first cell for which `blocked` is true, or
/// `None` if nothing is hit within `max_dist` or the ray leaves the raster.
pub fn cast_ray(
    width: usize,
    height: usize,
    start: (f64, f64),
    angle: f64,
    max_dist: f64,
    mut blocked: impl FnMut(usize, usize) -> bool,
) -> Option<f64> {
    let (dir_x, dir_y) = (angle.cos(), angle.sin());
    let mut cx = start.0.floor() as i64;
    let mut cy = start.1.floor() as i64;
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height;
    if !inside(cx, cy) {
        return None;
    }
    if blocked(cx as usize, cy as usize) {
        return Some(0.0);
    }
    let step_x: i64 = if dir_x > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dir_y > 0.0 { 1 } else { -1 };
    let delta_x = if dir_x != 0.0 { (1.0 / dir_x).abs() } else { f64::INFINITY };
    let delta_y = if dir_y != 0.0 { (1.0 / dir_y).abs() } else { f64::INFINITY };
    let mut t_max_x = if dir_x > 0.0 {
        (cx as f64 + 1.0 - start.0) * delta_x
    } else if dir_x < 0.0 {
        (start.0 - cx as f64) * delta_x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dir_y > 0.0 {
        (cy as f64 + 1.0 - start.1) * delta_y
    } else if dir_y < 0.0 {
        (start.1 - cy as f64) * delta_y
    } else {
        f64::INFINITY
    };
    loop {
        let t = if t_max_x < t_max_y {
            let t = t_max_x;
            t_max_x += delta_x;
            cx += step_x;
            t
        } else {
            let t = t_max_y;
            t_max_y += delta_y;
            cy += step_y;
            t
        };
        if t > max_dist || !inside(cx, cy) {
            return None;
        }
        if blocked(cx as usize, cy as usize) {
            return Some(t);
        }
    }
}
