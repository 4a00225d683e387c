//! Run-time navigation primitives: marker selection with hysteresis, turret
//! aiming, pose smoothing, two-rotation maneuvers and pure pursuit.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::angle::{circular_mean, normalize};
use crate::error::{Error, Result};
use crate::geometry::{MarkerDatabase, Pose2D};

/// A rival marker must be this much closer (metres) to take over tracking.
pub const SWITCH_MARGIN: f64 = 0.2;
pub const SMOOTHING_WINDOW: usize = 5;

/// Id of the marker nearest to `(x, y)`; ties go to the lowest id.
pub fn nearest_marker(x: f64, y: f64, db: &MarkerDatabase) -> Result<u32> {
    let mut best: Option<(f64, u32)> = None;
    for m in db.iter() {
        let d = (m.pose.x - x).hypot(m.pose.y - y);
        // Ascending id order, so strict comparison keeps the lowest id.
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, m.id));
        }
    }
    best.map(|(_, id)| id).ok_or(Error::EmptyDatabase)
}

/// Keeps tracking `current` unless the nearest marker is at least `margin`
/// metres closer.
pub fn switch_decision(current: u32, pose: &Pose2D, db: &MarkerDatabase, margin: f64) -> Result<u32> {
    let cur = db.get(current)?;
    let rival = nearest_marker(pose.x, pose.y, db)?;
    if rival == current {
        return Ok(current);
    }
    let r = db.get(rival)?;
    let d_cur = (cur.pose.x - pose.x).hypot(cur.pose.y - pose.y);
    let d_rival = (r.pose.x - pose.x).hypot(r.pose.y - pose.y);
    // Tolerance absorbs rounding when the margin is met exactly.
    Ok(if d_cur - d_rival >= margin - 1e-12 { rival } else { current })
}

/// Pan (robot-relative, anticlockwise) that points the camera at `target`.
pub fn pan_to_marker(pose: &Pose2D, target: (f64, f64)) -> Result<f64> {
    let dx = target.0 - pose.x;
    let dy = target.1 - pose.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    Ok(normalize(dy.atan2(dx) - pose.theta))
}

/// Sliding-window average of pose fixes: arithmetic mean of position and
/// circular mean of heading.
#[derive(Debug, Clone, PartialEq)]
pub struct FixSmoother {
    window: usize,
    buffer: VecDeque<Pose2D>,
}

impl FixSmoother {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("smoothing window must be at least 1".into()));
        }
        Ok(Self {
            window,
            buffer: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
    }

    pub fn push(&mut self, fix: Pose2D) -> Result<Pose2D> {
        if !fix.is_finite() {
            return Err(Error::NonFinite("pose fix"));
        }
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(fix);
        Ok(self.current().unwrap_or(fix))
    }

    pub fn current(&self) -> Option<Pose2D> {
        let n = self.buffer.len() as f64;
        if n == 0.0 {
            return None;
        }
        let x = self.buffer.iter().map(|p| p.x).sum::<f64>() / n;
        let y = self.buffer.iter().map(|p| p.y).sum::<f64>() / n;
        let theta = circular_mean(self.buffer.iter().map(|p| p.theta)).unwrap_or(self.buffer[0].theta);
        Some(Pose2D::new(x, y, theta))
    }
}

/// Rotate, drive straight, rotate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Maneuver {
    pub rotate_first: f64,
    pub translate: f64,
    pub rotate_second: f64,
}

impl Maneuver {
    /// Pose reached by executing the maneuver from `start`.
    pub fn apply(&self, start: &Pose2D) -> Pose2D {
        let heading = start.theta + self.rotate_first;
        let (s, c) = heading.sin_cos();
        Pose2D::new(
            start.x + self.translate * c,
            start.y + self.translate * s,
            heading + self.rotate_second,
        )
    }
}

/// Decomposes the motion from `s` to `d` into two rotations and a
/// translation. With no translation the first rotation is zero.
pub fn maneuver(s: &Pose2D, d: &Pose2D) -> Maneuver {
    let dx = d.x - s.x;
    let dy = d.y - s.y;
    let translate = dx.hypot(dy);
    let rotate_first = if translate == 0.0 {
        0.0
    } else {
        normalize(dy.atan2(dx) - s.theta)
    };
    Maneuver {
        rotate_first,
        translate,
        rotate_second: normalize(d.theta - s.theta - rotate_first),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurePursuitConfig {
    /// Metres along the path ahead of the closest point.
    pub lookahead: f64,
    pub max_linear: f64,
    pub max_angular: f64,
    /// Distance from the path end at which the run counts as finished.
    pub goal_tolerance: f64,
}

impl Default for PurePursuitConfig {
    fn default() -> Self {
        Self {
            lookahead: 1.0,
            max_linear: 0.3,
            max_angular: 1.0,
            goal_tolerance: 0.03,
        }
    }
}

impl PurePursuitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lookahead > 0.0) || !(self.max_linear > 0.0) || !(self.max_angular > 0.0) || !(self.goal_tolerance >= 0.0) {
            return Err(Error::InvalidArgument("pure pursuit parameters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PursuitCommand {
    pub v: f64,
    pub w: f64,
    pub curvature: f64,
    pub done: bool,
}

/// Polyline with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<(f64, f64)>,
    arc: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPlan);
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::NonFinite("path point"));
        }
        let mut arc = Vec::with_capacity(points.len());
        let mut s = 0.0;
        arc.push(0.0);
        for w in points.windows(2) {
            s += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            arc.push(s);
        }
        Ok(Self { points, arc })
    }

    pub fn length(&self) -> f64 {
        self.arc[self.arc.len() - 1]
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn end(&self) -> (f64, f64) {
        self.points[self.points.len() - 1]
    }

    /// Point at arc length `s`, clamped to the ends.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        if s <= 0.0 || self.points.len() == 1 {
            return self.points[0];
        }
        for i in 1..self.points.len() {
            if s <= self.arc[i] {
                let seg = self.arc[i] - self.arc[i - 1];
                let t = if seg > 0.0 { (s - self.arc[i - 1]) / seg } else { 0.0 };
                let (a, b) = (self.points[i - 1], self.points[i]);
                return (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            }
        }
        self.end()
    }

    /// Arc length of the point closest to `(x, y)` among arc lengths in
    /// `[from, to]`; the earliest wins ties.
    pub fn project(&self, x: f64, y: f64, from: f64, to: f64) -> f64 {
        if self.points.len() == 1 {
            return 0.0;
        }
        let mut best = (f64::INFINITY, from.max(0.0));
        for i in 1..self.points.len() {
            let (s0, s1) = (self.arc[i - 1], self.arc[i]);
            if s1 < from || s0 > to {
                continue;
            }
            let (a, b) = (self.points[i - 1], self.points[i]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((x - a.0) * dx + (y - a.1) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let seg = s1 - s0;
            let s = (s0 + t * seg).clamp(from.max(s0), to.min(s1));
            let t = if seg > 0.0 { (s - s0) / seg } else { 0.0 };
            let (px, py) = (a.0 + t * dx, a.1 + t * dy);
            let d = (px - x).hypot(py - y);
            if d < best.0 {
                best = (d, s);
            }
        }
        best.1
    }

    /// Distance from `(x, y)` to the nearest point of the polyline.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let (px, py) = self.point_at(self.project(x, y, 0.0, self.length()));
        (px - x).hypot(py - y)
    }
}

/// Pure pursuit command toward the point one lookahead ahead of the path
/// point closest to `pose` (searched over arc lengths `[from, to]`).
fn pursue(pose: &Pose2D, path: &Polyline, cfg: &PurePursuitConfig, from: f64, to: f64) -> (PursuitCommand, f64) {
    let s = path.project(pose.x, pose.y, from, to);
    let end = path.end();
    if (end.0 - pose.x).hypot(end.1 - pose.y) <= cfg.goal_tolerance {
        return (
            PursuitCommand {
                done: true,
                ..Default::default()
            },
            s,
        );
    }
    let goal = path.point_at(s + cfg.lookahead);
    let (dx, dy) = (goal.0 - pose.x, goal.1 - pose.y);
    let (sn, cs) = pose.theta.sin_cos();
    let y_goal = -sn * dx + cs * dy;
    let curvature = 2.0 * y_goal / (cfg.lookahead * cfg.lookahead);
    // Slow down near the end so the stop lands inside the tolerance.
    let remaining = (end.0 - pose.x).hypot(end.1 - pose.y);
    let mut v = cfg.max_linear.min(remaining.max(cfg.goal_tolerance));
    let mut w = v * curvature;
    if w.abs() > cfg.max_angular {
        w = cfg.max_angular.copysign(w);
        v = w / curvature;
    }
    (
        PursuitCommand {
            v,
            w,
            curvature,
            done: false,
        },
        s,
    )
}

/// Stateless pure pursuit step over the whole path.
pub fn pure_pursuit_step(pose: &Pose2D, path: &Polyline, cfg: &PurePursuitConfig) -> Result<PursuitCommand> {
    cfg.validate()?;
    if !pose.is_finite() {
        return Err(Error::NonFinite("robot pose"));
    }
    Ok(pursue(pose, path, cfg, 0.0, path.length()).0)
}

/// Pure pursuit that remembers its progress, so paths that pass near
/// themselves (loops) are followed in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTracker {
    pub path: Polyline,
    pub config: PurePursuitConfig,
    progress: f64,
}

impl PathTracker {
    pub fn new(path: Polyline, config: PurePursuitConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            path,
            config,
            progress: 0.0,
        })
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }

    pub fn step(&mut self, pose: &Pose2D) -> Result<PursuitCommand> {
        if !pose.is_finite() {
            return Err(Error::NonFinite("robot pose"));
        }
        let window = self.progress + 2.0 * self.config.lookahead;
        let (cmd, s) = pursue(pose, &self.path, &self.config, self.progress, window);
        self.progress = self.progress.max(s);
        Ok(cmd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::deg;
    use crate::geometry::Marker;

    fn db(points: &[(u32, f64, f64)]) -> MarkerDatabase {
        MarkerDatabase::new(points.iter().map(|&(id, x, y)| Marker::new(id, Pose2D::new(x, y, 0.0), 4, 0.2).unwrap())).unwrap()
    }

    #[test]
    fn nearest_examples() {
        assert_eq!(nearest_marker(0.0, 0.0, &db(&[(7, 1.0, 0.0), (2, 3.0, 0.0)])).unwrap(), 7);
        assert_eq!(nearest_marker(0.0, 0.0, &db(&[(9, 0.0, 1.0), (4, 1.0, 0.0)])).unwrap(), 4);
        assert_eq!(nearest_marker(0.0, 0.0, &MarkerDatabase::default()), Err(Error::EmptyDatabase));
    }

    #[test]
    fn hysteresis_examples() {
        let robot = Pose2D::new(0.0, 0.0, 0.0);
        let d = db(&[(0, 2.0, 0.0), (1, -1.9, 0.0)]);
        assert_eq!(switch_decision(0, &robot, &d, SWITCH_MARGIN).unwrap(), 0);
        let d = db(&[(0, 2.0, 0.0), (1, -1.7, 0.0)]);
        assert_eq!(switch_decision(0, &robot, &d, SWITCH_MARGIN).unwrap(), 1);
        let d = db(&[(0, 2.0, 0.0)]);
        assert_eq!(switch_decision(0, &robot, &d, SWITCH_MARGIN).unwrap(), 0);
    }

    #[test]
    fn pan_examples() {
        let p = pan_to_marker(&Pose2D::new(0.0, 0.0, 0.0), (1.0, 1.0)).unwrap();
        assert!((p - deg(45.0)).abs() < 1e-15);
        let p = pan_to_marker(&Pose2D::new(0.0, 0.0, deg(90.0)), (0.0, 5.0)).unwrap();
        assert!(p.abs() < 1e-15);
        assert!(pan_to_marker(&Pose2D::new(1.0, 1.0, 0.0), (1.0, 1.0)).is_err());
    }

    #[test]
    fn smoother_examples() {
        let mut s = FixSmoother::new(5).unwrap();
        for _ in 0..8 {
            let out = s.push(Pose2D::new(1.0, 2.0, 3.0)).unwrap();
            assert_eq!((out.x, out.y), (1.0, 2.0));
            assert!((out.theta - 3.0).abs() < 1e-12);
        }
        let mut s = FixSmoother::new(5).unwrap();
        for i in 0..20 {
            let noise = if i % 2 == 0 { 0.15 } else { -0.15 };
            let out = s.push(Pose2D::new(noise, 0.0, 0.0)).unwrap();
            if i >= 4 {
                assert!(out.x.abs() < 0.15);
            }
        }
        // Headings straddling ±π average to π, not 0.
        let mut s = FixSmoother::new(2).unwrap();
        s.push(Pose2D::new(0.0, 0.0, 3.1)).unwrap();
        let out = s.push(Pose2D::new(0.0, 0.0, -3.1)).unwrap();
        assert!(out.theta.abs() > 3.1);
        assert!(s.push(Pose2D::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn maneuver_examples() {
        let m = maneuver(&Pose2D::new(0.0, 0.0, 0.0), &Pose2D::new(1.0, 1.0, deg(90.0)));
        assert!((m.rotate_first - deg(45.0)).abs() < 1e-15);
        assert!((m.translate - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.rotate_second - deg(45.0)).abs() < 1e-15);
        let p = Pose2D::new(3.0, -1.0, 2.0);
        assert_eq!(maneuver(&p, &p), Maneuver::default());
    }

    #[test]
    fn curvature_examples() {
        let path = Polyline::new(alloc::vec![(0.0, 0.0), (10.0, 0.0)]).unwrap();
        let cfg = PurePursuitConfig::default();
        let on = pure_pursuit_step(&Pose2D::new(1.0, 0.0, 0.0), &path, &cfg).unwrap();
        assert_eq!(on.curvature, 0.0);
        assert_eq!(on.w, 0.0);
        let left = pure_pursuit_step(&Pose2D::new(1.0, 0.1, 0.0), &path, &cfg).unwrap();
        assert!((left.curvature + 0.2).abs() < 1e-12);
        assert!(left.w < 0.0);
        // Overshoot: the end is behind and to the left, so steer left.
        let past = pure_pursuit_step(&Pose2D::new(10.2, -0.1, 0.0), &path, &cfg).unwrap();
        assert!(past.curvature > 0.0);
        let done = pure_pursuit_step(&Pose2D::new(10.0, 0.01, 0.0), &path, &cfg).unwrap();
        assert!(done.done && done.v == 0.0 && done.w == 0.0);
        assert!(Polyline::new(alloc::vec![]).is_err());
    }

    #[test]
    fn tracker_follows_loop_in_order() {
        // Out and back along the same line: the stateless closest point is
        // ambiguous, the tracker's progress is not.
        let path = Polyline::new(alloc::vec![(0.0, 0.0), (3.0, 0.0), (3.0, 0.5), (0.0, 0.5)]).unwrap();
        let mut t = PathTracker::new(path, PurePursuitConfig::default()).unwrap();
        let c = t.step(&Pose2D::new(0.0, 0.0, 0.0)).unwrap();
        assert!(c.curvature.abs() < 1e-12);
        assert!(t.progress() < 0.1);
    }
}
