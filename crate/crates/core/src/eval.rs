//! Map and trajectory quality metrics: nearest-neighbour distances between
//! obstacle point sets, rigid ICP registration and absolute trajectory error.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::angle::deg;
use crate::error::{Error, Result};
use crate::geometry::Transform2D;
use crate::mapping::binarize_and_thin;
use crate::raster::Grid;

/// Centimetres per cell at the default map resolution.
pub const CM_PER_CELL: f64 = 5.0;

pub type Point = (f64, f64);

fn check_points(points: &[Point]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::NonFinite("point coordinate"));
    }
    Ok(())
}

/// Thresholds an occupancy grid, thins obstacles to one cell and returns the
/// remaining obstacle cells as `(x, y)` cell coordinates.
pub fn extract_obstacle_points(values: &Grid<i8>, threshold: i8) -> Result<Vec<Point>> {
    let thin = binarize_and_thin(values, threshold);
    let pts: Vec<Point> = thin
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| {
            let (x, y) = thin.coords(i);
            (x as f64, y as f64)
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::NoObstacles);
    }
    Ok(pts)
}

/// Uniform bucket grid over a point set. Queries return exactly the same
/// distance as a linear scan.
#[derive(Debug, Clone)]
pub struct NearestIndex {
    points: Vec<Point>,
    bucket: f64,
    buckets: BTreeMap<(i64, i64), Vec<usize>>,
    /// Bucket-coordinate bounding box.
    lo: (i64, i64),
    hi: (i64, i64),
}

impl NearestIndex {
    pub fn new(points: &[Point]) -> Result<Self> {
        check_points(points)?;
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min_x = min_x.min(p.0);
            min_y = min_y.min(p.1);
            max_x = max_x.max(p.0);
            max_y = max_y.max(p.1);
        }
        let n = points.len() as f64;
        let extent = (max_x - min_x).max(max_y - min_y);
        let area = (max_x - min_x) * (max_y - min_y);
        // Roughly two points per bucket; thin sets fall back to spacing along
        // their long side.
        let bucket = (2.0 * area / n).sqrt().max(extent / n).max(1e-9);
        let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        let key = |p: &Point| ((p.0 / bucket).floor() as i64, (p.1 / bucket).floor() as i64);
        let (mut lo, mut hi) = ((i64::MAX, i64::MAX), (i64::MIN, i64::MIN));
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            lo = (lo.0.min(k.0), lo.1.min(k.1));
            hi = (hi.0.max(k.0), hi.1.max(k.1));
            buckets.entry(k).or_default().push(i);
        }
        Ok(Self {
            points: points.to_vec(),
            bucket,
            buckets,
            lo,
            hi,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Index of and distance to the nearest indexed point; ties go to the
    /// lowest index.
    pub fn nearest(&self, q: Point) -> (usize, f64) {
        let b = self.bucket;
        let (kx, ky) = ((q.0 / b).floor() as i64, (q.1 / b).floor() as i64);
        let mut best = (usize::MAX, f64::INFINITY);
        let visit = |key: (i64, i64), best: &mut (usize, f64)| {
            if let Some(ids) = self.buckets.get(&key) {
                for &i in ids {
                    let p = self.points[i];
                    let d = (p.0 - q.0).hypot(p.1 - q.1);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
        };
        // Chebyshev ring distance from the query bucket to the occupied box.
        let gap = |k: i64, lo: i64, hi: i64| if k < lo { lo - k } else if k > hi { k - hi } else { 0 };
        let mut ring = gap(kx, self.lo.0, self.hi.0).max(gap(ky, self.lo.1, self.hi.1));
        let max_ring = (kx - self.lo.0).abs().max((self.hi.0 - kx).abs()).max((ky - self.lo.1).abs()).max((self.hi.1 - ky).abs());
        loop {
            let x0 = (kx - ring).max(self.lo.0);
            let x1 = (kx + ring).min(self.hi.0);
            let y0 = (ky - ring).max(self.lo.1);
            let y1 = (ky + ring).min(self.hi.1);
            for y in [ky - ring, ky + ring] {
                if (self.lo.1..=self.hi.1).contains(&y) {
                    for x in x0..=x1 {
                        visit((x, y), &mut best);
                    }
                }
                if ring == 0 {
                    break;
                }
            }
            if ring > 0 {
                for x in [kx - ring, kx + ring] {
                    if (self.lo.0..=self.hi.0).contains(&x) {
                        for y in y0.max(ky - ring + 1)..=y1.min(ky + ring - 1) {
                            visit((x, y), &mut best);
                        }
                    }
                }
            }
            // Every point outside the searched square is at least this far.
            let gx = (q.0 - (kx - ring) as f64 * b).min(((kx + ring + 1) as f64) * b - q.0);
            let gy = (q.1 - (ky - ring) as f64 * b).min(((ky + ring + 1) as f64) * b - q.1);
            if ring >= max_ring || best.1 < gx.min(gy) - 1e-9 * b {
                return best;
            }
            ring += 1;
        }
    }
}

/// Nearest-neighbour distance from every source point to the target set.
pub fn nearest_distances(source: &[Point], target: &[Point]) -> Result<Vec<f64>> {
    check_points(source)?;
    let index = NearestIndex::new(target)?;
    Ok(source.iter().map(|&p| index.nearest(p).1).collect())
}

/// Mean distance from each source point to its nearest target point.
pub fn adnn(source: &[Point], target: &[Point]) -> Result<f64> {
    let d = nearest_distances(source, target)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Average of both directions.
pub fn adnn_symmetric(a: &[Point], b: &[Point]) -> Result<f64> {
    Ok(0.5 * (adnn(a, b)? + adnn(b, a)?))
}

/// Root mean square of the same nearest-neighbour distances as [`adnn`].
pub fn rmse(source: &[Point], target: &[Point]) -> Result<f64> {
    let d = nearest_distances(source, target)?;
    Ok((d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt())
}

/// Least-squares rigid transform taking `src[i]` onto `dst[i]`.
fn fit_rigid(src: &[Point], dst: &[Point]) -> Transform2D {
    let n = src.len() as f64;
    let cs = (src.iter().map(|p| p.0).sum::<f64>() / n, src.iter().map(|p| p.1).sum::<f64>() / n);
    let cd = (dst.iter().map(|p| p.0).sum::<f64>() / n, dst.iter().map(|p| p.1).sum::<f64>() / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in src.iter().zip(dst) {
        let (ax, ay) = (a.0 - cs.0, a.1 - cs.1);
        let (bx, by) = (b.0 - cd.0, b.1 - cd.1);
        sxx += ax * bx + ay * by;
        sxy += ax * by - ay * bx;
    }
    let angle = sxy.atan2(sxx);
    let (s, c) = angle.sin_cos();
    Transform2D::new(angle, cd.0 - (c * cs.0 - s * cs.1), cd.1 - (s * cs.0 + c * cs.1))
}

/// True when the points are (numerically) on a single line.
fn is_degenerate(points: &[Point]) -> bool {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    let tr = a + c;
    let det = a * c - b * b;
    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
    let small = tr / 2.0 - disc;
    small <= 1e-12 * tr.max(1e-300)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpResult {
    /// Maps source points into the target frame.
    pub transform: Transform2D,
    pub iterations: usize,
    /// Mean squared nearest-neighbour distance after alignment.
    pub residual: f64,
    /// Set when the input was collinear and the identity was returned.
    pub degenerate: bool,
}

fn icp_from(source: &[Point], index: &NearestIndex, start: Transform2D, max_iter: usize, tol: f64) -> IcpResult {
    let mut t = start;
    let mut prev = f64::INFINITY;
    let mut moved: Vec<Point> = Vec::with_capacity(source.len());
    let mut matched: Vec<Point> = Vec::with_capacity(source.len());
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        iterations += 1;
        moved.clear();
        matched.clear();
        let mut sq = 0.0;
        for &p in source {
            let q = t.apply(p.0, p.1);
            let (i, d) = index.nearest(q);
            sq += d * d;
            moved.push(q);
            matched.push(index.points()[i]);
        }
        residual = sq / source.len() as f64;
        if (prev - residual).abs() < tol {
            break;
        }
        prev = residual;
        t = fit_rigid(&moved, &matched).compose(&t);
    }
    IcpResult {
        transform: t,
        iterations,
        residual,
        degenerate: false,
    }
}

/// Rigid point-to-point ICP. Several initial rotations (up to ±45°) are
/// tried, each also from a centroid-aligned start, and the lowest final
/// residual wins. The winner is then refined by restarting from small
/// rotations and shifts around it while the residual keeps dropping.
pub fn icp_align(source: &[Point], target: &[Point], max_iter: usize, tol: f64) -> Result<IcpResult> {
    check_points(source)?;
    check_points(target)?;
    if source.len() < 3 {
        return Err(Error::TooFewPoints(source.len()));
    }
    if target.len() < 3 {
        return Err(Error::TooFewPoints(target.len()));
    }
    let index = NearestIndex::new(target)?;
    if is_degenerate(source) || is_degenerate(target) {
        let residual = nearest_distances(source, target)?.iter().map(|d| d * d).sum::<f64>() / source.len() as f64;
        return Ok(IcpResult {
            transform: Transform2D::IDENTITY,
            iterations: 0,
            residual,
            degenerate: true,
        });
    }
    let centroid = |pts: &[Point]| {
        let n = pts.len() as f64;
        (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n)
    };
    let (cs, ct) = (centroid(source), centroid(target));
    let mut best: Option<IcpResult> = None;
    for &a in &[0.0, 15.0, -15.0, 30.0, -30.0, 45.0, -45.0] {
        let rot = Transform2D::new(deg(a), 0.0, 0.0);
        let (rx, ry) = rot.apply(cs.0, cs.1);
        let starts = [rot, Transform2D::new(deg(a), ct.0 - rx, ct.1 - ry)];
        for s in starts {
            let r = icp_from(source, &index, s, max_iter, tol);
            if best.is_none_or(|b| r.residual < b.residual) {
                best = Some(r);
            }
        }
    }
    let mut best = best.ok_or(Error::EmptyPointSet)?;
    // Grid-sampled walls leave shallow minima a fraction of a cell from the
    // true alignment; nudge the winner about the aligned centroid.
    let nudges: [(f64, f64, f64); 8] = [
        (0.5, 0.0, 0.0),
        (-0.5, 0.0, 0.0),
        (1.0, 0.0, 0.0),
        (-1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, -1.0, 0.0),
        (0.0, 0.0, 1.0),
        (0.0, 0.0, -1.0),
    ];
    for _ in 0..8 {
        let c = best.transform.apply(cs.0, cs.1);
        let mut improved = false;
        for &(a, dx, dy) in &nudges {
            let rot = Transform2D::new(deg(a), 0.0, 0.0);
            let (rx, ry) = rot.apply(c.0, c.1);
            let nudge = Transform2D::new(deg(a), c.0 - rx + dx, c.1 - ry + dy);
            let r = icp_from(source, &index, nudge.compose(&best.transform), max_iter, tol);
            if r.residual < best.residual - tol {
                best = r;
                improved = true;
            }
        }
        if !improved || best.residual <= tol {
            break;
        }
    }
    Ok(best)
}

/// A timestamped planar position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stamped {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AteResult {
    pub rmse: f64,
    pub pairs: usize,
    pub aligned: bool,
}

/// Pairs each estimate with the ground-truth sample nearest in time, within
/// `max_gap` seconds. Ties go to the earlier ground-truth sample.
pub fn associate(estimate: &[Stamped], truth: &[Stamped], max_gap: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| truth[a].t.total_cmp(&truth[b].t).then(a.cmp(&b)));
    let mut pairs = Vec::new();
    for (i, e) in estimate.iter().enumerate() {
        let k = order.partition_point(|&j| truth[j].t < e.t);
        let mut best: Option<(f64, usize)> = None;
        for cand in [k.checked_sub(1), Some(k)].into_iter().flatten() {
            if let Some(&j) = order.get(cand) {
                let gap = (truth[j].t - e.t).abs();
                if best.is_none_or(|(g, _)| gap < g) {
                    best = Some((gap, j));
                }
            }
        }
        if let Some((gap, j)) = best {
            if gap <= max_gap {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Absolute trajectory error: RMSE of position differences after optional
/// rigid alignment of the estimate onto the ground truth.
pub fn ate(estimate: &[Stamped], truth: &[Stamped], max_gap: f64, align: bool) -> Result<AteResult> {
    if estimate.iter().chain(truth).any(|s| !s.t.is_finite() || !s.x.is_finite() || !s.y.is_finite()) {
        return Err(Error::NonFinite("trajectory sample"));
    }
    let pairs = associate(estimate, truth, max_gap);
    if pairs.is_empty() {
        return Err(Error::NoAssociation);
    }
    let src: Vec<Point> = pairs.iter().map(|&(i, _)| (estimate[i].x, estimate[i].y)).collect();
    let dst: Vec<Point> = pairs.iter().map(|&(_, j)| (truth[j].x, truth[j].y)).collect();
    let t = if align {
        fit_rigid(&src, &dst)
    } else {
        Transform2D::IDENTITY
    };
    let sq: f64 = src
        .iter()
        .zip(&dst)
        .map(|(s, d)| {
            let (x, y) = t.apply(s.0, s.1);
            (x - d.0).powi(2) + (y - d.1).powi(2)
        })
        .sum();
    Ok(AteResult {
        rmse: (sq / src.len() as f64).sqrt(),
        pairs: src.len(),
        aligned: align,
    })
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: &'static str,
    pub environment: alloc::string::String,
    pub method: alloc::string::String,
    pub value: f64,
}

/// Map comparison summary: the evaluated map is aligned onto the ground
/// truth before distances are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapComparison {
    pub adnn_cells: f64,
    pub adnn_cm: f64,
    pub rmse_cells: f64,
    pub icp: IcpResult,
}

pub fn compare_maps(evaluated: &[Point], truth: &[Point], symmetric: bool) -> Result<MapComparison> {
    let icp = if evaluated.len() >= 3 && truth.len() >= 3 {
        icp_align(evaluated, truth, 100, 1e-10)?
    } else {
        IcpResult {
            transform: Transform2D::IDENTITY,
            iterations: 0,
            residual: 0.0,
            degenerate: true,
        }
    };
    let aligned: Vec<Point> = evaluated.iter().map(|p| icp.transform.apply(p.0, p.1)).collect();
    let adnn_cells = if symmetric {
        adnn_symmetric(&aligned, truth)?
    } else {
        adnn(&aligned, truth)?
    };
    Ok(MapComparison {
        adnn_cells,
        adnn_cm: adnn_cells * CM_PER_CELL,
        rmse_cells: rmse(&aligned, truth)?,
        icp,
    })
}
