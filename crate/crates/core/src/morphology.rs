//! Binary morphology: thinning, simple-point tests, connected components and
//! the exact Euclidean distance transform.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::raster::{BitGrid, Grid, NEIGHBORS8};

/// Foreground flags of the 8 neighbours in [`NEIGHBORS8`] order; cells outside
/// the raster count as background.
#[inline]
pub fn neighborhood(g: &BitGrid, x: usize, y: usize) -> [bool; 8] {
    let mut n = [false; 8];
    for (k, (dx, dy)) in NEIGHBORS8.iter().enumerate() {
        n[k] = *g.get_i(x as i64 + dx, y as i64 + dy).unwrap_or(&false);
    }
    n
}

/// 8-connectivity number (Yokoi). A foreground pixel is simple, i.e. its
/// removal preserves topology, iff this equals 1.
#[inline]
pub fn connectivity_number(n: &[bool; 8]) -> u32 {
    let b = |k: usize| u32::from(!n[k % 8]);
    [0usize, 2, 4, 6]
        .iter()
        .map(|&k| b(k) - b(k) * b(k + 1) * b(k + 2))
        .sum()
}

#[inline]
pub fn is_simple(g: &BitGrid, x: usize, y: usize) -> bool {
    connectivity_number(&neighborhood(g, x, y)) == 1
}

/// Zhang–Suen thinning, with each flagged pixel re-checked for simplicity
/// before removal. Reduces foreground strokes to 8-connected
/// one-pixel-wide curves while preserving connectivity.
pub fn thin(input: &BitGrid) -> BitGrid {
    let mut g = input.clone();
    let (w, h) = (g.width(), g.height());
    let mut to_clear = Vec::new();
    loop {
        let mut changed = false;
        for pass in 0..2 {
            to_clear.clear();
            for y in 0..h {
                for x in 0..w {
                    if !*g.get(x, y) {
                        continue;
                    }
                    // p2..p9 clockwise starting north (north = +y here).
                    let at = |dx: i64, dy: i64| u8::from(*g.get_i(x as i64 + dx, y as i64 + dy).unwrap_or(&false));
                    let p = [
                        at(0, 1),
                        at(1, 1),
                        at(1, 0),
                        at(1, -1),
                        at(0, -1),
                        at(-1, -1),
                        at(-1, 0),
                        at(-1, 1),
                    ];
                    let b: u8 = p.iter().sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
                    let ok = if pass == 0 {
                        p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
                    } else {
                        p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
                    };
                    if ok {
                        to_clear.push((x, y));
                    }
                }
            }
            // Parallel deletion can erase a 2x2 block outright; clear one at a
            // time and skip pixels that stopped being simple.
            for &(x, y) in &to_clear {
                if is_simple(&g, x, y) {
                    g.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// Labels 8-connected foreground components. Background cells get `u32::MAX`.
/// Labels are assigned in raster order starting at 0.
pub fn label_components(g: &BitGrid) -> (Grid<u32>, u32) {
    let mut labels = Grid::new(g.width(), g.height(), u32::MAX);
    let mut next = 0u32;
    let mut stack = Vec::new();
    for y in 0..g.height() {
        for x in 0..g.width() {
            if !*g.get(x, y) || *labels.get(x, y) != u32::MAX {
                continue;
            }
            labels.set(x, y, next);
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                for (nx, ny) in g.neighbors8(cx, cy) {
                    if *g.get(nx, ny) && *labels.get(nx, ny) == u32::MAX {
                        labels.set(nx, ny, next);
                        stack.push((nx, ny));
                    }
                }
            }
            next += 1;
        }
    }
    (labels, next)
}

pub fn count_components(g: &BitGrid) -> u32 {
    label_components(g).1
}

/// Exact Euclidean distance (in cells, between cell centres) from every cell
/// to the nearest `true` cell of `obstacles`. Obstacle cells get 0.
pub fn distance_transform(obstacles: &BitGrid) -> Result<Grid<f64>> {
    let (w, h) = (obstacles.width(), obstacles.height());
    let n_obs = obstacles.data().iter().filter(|&&o| o).count();
    if n_obs == 0 {
        return Err(Error::NoObstacles);
    }
    if n_obs == obstacles.len() {
        return Err(Error::NoFreeCells);
    }
    const BIG: f64 = 1e20;
    let mut sq = Grid::from_fn(w, h, |x, y| if *obstacles.get(x, y) { 0.0 } else { BIG });

    let mut f = vec![0.0; w.max(h)];
    let mut d = vec![0.0; w.max(h)];
    let mut v = vec![0usize; w.max(h)];
    let mut z = vec![0.0; w.max(h) + 1];

    for x in 0..w {
        for y in 0..h {
            f[y] = *sq.get(x, y);
        }
        squared_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            sq.set(x, y, d[y]);
        }
    }
    for y in 0..h {
        for x in 0..w {
            f[x] = *sq.get(x, y);
        }
        squared_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        for x in 0..w {
            sq.set(x, y, d[x]);
        }
    }
    Ok(sq.map(|&s| s.sqrt()))
}

/// One-dimensional squared distance transform of a sampled function
/// (Felzenszwalb & Huttenlocher lower envelope of parabolas).
fn squared_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    // Cannot happen with z[0] = -inf, kept for clarity.
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}
