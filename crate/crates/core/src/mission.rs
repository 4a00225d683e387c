//! Closed-loop simulation runs: marker-based localization with turret
//! tracking, scripted mapping passes and waypoint navigation.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::angle::normalize;
use crate::error::{Error, Result};
use crate::geometry::{chain_marker_transform, Marker, MarkerDatabase, Pose2D, TurretAngles};
use crate::mapping::{preprocess_scan, raytrace_local, OccupancyGrid, SensorModel, SCAN_CEILING};
use crate::navigation::{
    pan_to_marker, switch_decision, FixSmoother, PathTracker, Polyline, PurePursuitConfig, SMOOTHING_WINDOW,
    SWITCH_MARGIN,
};
use crate::sim::{
    integrate_unicycle, robot_step, scanner_pose, simulate_marker_detection, simulate_scan, DetectionSpec, LaserSpec,
    Pid, RobotLimits, RobotState, TurretServo, Visibility, World,
};

/// Default control period: one camera frame at 30 fps.
pub const CONTROL_DT: f64 = 1.0 / 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizerConfig {
    pub window: usize,
    pub switch_margin: f64,
    /// Seconds without a fix before localization counts as lost.
    pub horizon: f64,
    pub turret_pid: Pid,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            window: SMOOTHING_WINDOW,
            switch_margin: SWITCH_MARGIN,
            horizon: 1.0,
            turret_pid: Pid::new(0.7, 0.0, 0.0),
        }
    }
}

/// Result of one localizer tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fix {
    /// Pose computed from this frame's marker observation, if any.
    pub raw: Option<Pose2D>,
    /// Smoothed (or dead-reckoned) estimate.
    pub estimate: Pose2D,
    pub tracked: u32,
}

/// Tracks one marker at a time with the turret and turns its observations
/// into smoothed pose estimates.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub db: MarkerDatabase,
    pub config: LocalizerConfig,
    pub turret: TurretServo,
    tracked: u32,
    smoother: FixSmoother,
    estimate: Pose2D,
    since_fix: f64,
}

impl Localizer {
    /// Starts at a known pose, tracking the nearest marker with the turret
    /// already on target.
    pub fn new(db: MarkerDatabase, initial: Pose2D, config: LocalizerConfig) -> Result<Self> {
        let tracked = crate::navigation::nearest_marker(initial.x, initial.y, &db)?;
        let mut turret = TurretServo::new(config.turret_pid);
        let m = db.get(tracked)?;
        let pan = pan_to_marker(&initial, (m.pose.x, m.pose.y)).unwrap_or(0.0);
        turret.point_at(pan, 0.0)?;
        turret.pan_deg = turret.target_pan_deg;
        Ok(Self {
            smoother: FixSmoother::new(config.window)?,
            db,
            config,
            turret,
            tracked,
            estimate: initial,
            since_fix: 0.0,
        })
    }

    pub fn tracked(&self) -> u32 {
        self.tracked
    }

    pub fn estimate(&self) -> Pose2D {
        self.estimate
    }

    /// Advances one period. `odometry` is the velocity command applied since
    /// the previous tick and drives the estimate between fixes.
    pub fn tick<R: Rng + ?Sized>(
        &mut self,
        world: &World,
        truth: &Pose2D,
        odometry: (f64, f64),
        dt: f64,
        spec: &DetectionSpec,
        rng: &mut R,
    ) -> Result<Fix> {
        let predicted = integrate_unicycle(&self.estimate, odometry.0, odometry.1, dt);
        let target = *self.db.get(self.tracked)?;
        let dist = (target.pose.x - predicted.x).hypot(target.pose.y - predicted.y);
        let pan = pan_to_marker(&predicted, (target.pose.x, target.pose.y)).unwrap_or(0.0);
        self.turret.point_at(pan, spec.marker_height.atan2(dist))?;
        self.turret.step(dt)?;
        let detections = simulate_marker_detection(world, truth, self.turret.angles().pan, spec, rng)?;
        let raw = detections
            .iter()
            .find(|d| d.id == self.tracked && d.state == Visibility::Tracked)
            .and_then(|d| d.observation.map(|obs| (d, obs)))
            .map(|(d, obs)| self.db.locate(d.id, d.face, &obs, &d.turret))
            .transpose()?;
        match raw {
            Some(p) => {
                self.estimate = self.smoother.push(p)?;
                self.since_fix = 0.0;
            }
            None => {
                self.estimate = predicted;
                self.since_fix += dt;
                if self.since_fix > self.config.horizon {
                    return Err(Error::LocalizationLost(format!(
                        "no fix from marker {} for {:.2} s near ({:.2}, {:.2})",
                        self.tracked, self.since_fix, predicted.x, predicted.y
                    )));
                }
            }
        }
        let next = switch_decision(self.tracked, &self.estimate, &self.db, self.config.switch_margin)?;
        if next != self.tracked && !in_dead_zone(&self.estimate, self.db.get(next)?) {
            self.tracked = next;
        }
        if raw.is_none() && in_dead_zone(&self.estimate, &target) {
            if let Some(id) = self.fallback_marker(spec) {
                self.tracked = id;
            }
        }
        Ok(Fix {
            raw,
            estimate: self.estimate,
            tracked: self.tracked,
        })
    }

    /// Nearest known marker within tracking distance whose bearing the pan
    /// servo can reach, if any.
    fn fallback_marker(&self, spec: &DetectionSpec) -> Option<u32> {
        let est = self.estimate;
        self.db
            .iter()
            .filter(|m| m.id != self.tracked && !in_dead_zone(&est, m))
            .filter_map(|m| {
                let d = (m.pose.x - est.x).hypot(m.pose.y - est.y);
                let reach = spec.limits(m.size_cm())?.tracking;
                (d <= reach).then_some((d, m.id))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }

    /// Registers markers that are not yet in the database but can be tracked
    /// from the current spot, chaining their pose through `fix`. The turret
    /// is swung to each candidate in turn (a scripted transition trigger).
    /// Returns the ids added, ascending.
    pub fn discover<R: Rng + ?Sized>(
        &mut self,
        world: &World,
        truth: &Pose2D,
        fix: &Pose2D,
        spec: &DetectionSpec,
        rng: &mut R,
    ) -> Result<Vec<u32>> {
        let prev = *self.db.get(self.tracked)?;
        let mut added = Vec::new();
        let unknown: Vec<Marker> = world.markers.iter().filter(|m| !self.db.contains(m.id)).copied().collect();
        for m in unknown {
            let d = (m.pose.x - truth.x).hypot(m.pose.y - truth.y);
            let Some(limits) = spec.limits(m.size_cm()) else {
                return Err(Error::UnknownMarkerSize(m.id));
            };
            if d > limits.tracking || d == 0.0 {
                continue;
            }
            let aim = pan_to_marker(truth, (m.pose.x, m.pose.y))?;
            let seen = simulate_marker_detection(world, truth, aim, spec, rng)?;
            let Some(det) = seen.iter().find(|x| x.id == m.id && x.state == Visibility::Tracked) else {
                continue;
            };
            // Pose of the robot in the frame of the tracked marker's face 0.
            let prev_face = prev.face_pose(0);
            let wrt_prev = prev_face.inverse().compose(fix);
            let chained = chain_marker_transform(&wrt_prev, det.observation.as_ref(), &det.turret)?;
            let face = prev_face.compose(&chained.to_pose());
            let step = 2.0 * PI / f64::from(m.faces);
            let unit = Pose2D::new(face.x, face.y, normalize(face.theta - step * f64::from(det.face)));
            self.db.insert(Marker::new(m.id, unit, m.faces, m.size)?)?;
            added.push(m.id);
        }
        Ok(added)
    }
}

/// Whether the marker lies in the blind sector behind the robot that the
/// pan servo cannot reach.
fn in_dead_zone(pose: &Pose2D, marker: &Marker) -> bool {
    match pan_to_marker(pose, (marker.pose.x, marker.pose.y)) {
        Ok(pan) => !TurretAngles { pan, tilt: 0.0 }.pan_within_limits(),
        Err(_) => false,
    }
}

/// Ground-truth poses along a route, one per control period: rotate in
/// place to face each leg, then drive it at constant speed.
pub fn scripted_path(route: &[(f64, f64)], initial_heading: f64, speed: f64, turn_rate: f64, dt: f64) -> Result<Vec<Pose2D>> {
    if route.is_empty() {
        return Err(Error::EmptyPlan);
    }
    if !(speed > 0.0 && turn_rate > 0.0 && dt > 0.0) {
        return Err(Error::InvalidArgument("speed, turn rate and dt must be positive".into()));
    }
    let mut pose = Pose2D::new(route[0].0, route[0].1, initial_heading);
    let mut out = alloc::vec![pose];
    for seg in route.windows(2) {
        let (dx, dy) = (seg[1].0 - seg[0].0, seg[1].1 - seg[0].1);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let heading = dy.atan2(dx);
        let turn = normalize(heading - pose.theta);
        let steps = (turn.abs() / (turn_rate * dt)).ceil() as usize;
        for k in 1..=steps {
            out.push(Pose2D::new(pose.x, pose.y, normalize(pose.theta + turn * k as f64 / steps as f64)));
        }
        let steps = (len / (speed * dt)).ceil() as usize;
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            out.push(Pose2D::new(seg[0].0 + t * dx, seg[0].1 + t * dy, heading));
        }
        pose = Pose2D::new(seg[1].0, seg[1].1, heading);
    }
    Ok(out)
}

/// One logged control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub truth: Pose2D,
    pub estimate: Pose2D,
    /// Whether this period produced a fresh marker fix.
    pub raw: bool,
    pub raw_pose: Option<Pose2D>,
    pub tracked: u32,
    pub v: f64,
    pub w: f64,
    /// Route leg being executed, when applicable.
    pub leg: Option<usize>,
}

/// Runs the localizer along fixed ground-truth poses (no controller).
pub fn replay_localization<R: Rng + ?Sized>(
    world: &World,
    db: MarkerDatabase,
    path: &[Pose2D],
    dt: f64,
    config: LocalizerConfig,
    spec: &DetectionSpec,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    let first = *path.first().ok_or(Error::EmptyPlan)?;
    let mut loc = Localizer::new(db, first, config)?;
    let mut out = Vec::with_capacity(path.len());
    let mut prev = first;
    for (i, truth) in path.iter().enumerate() {
        let v = prev.distance_to(truth) / dt;
        let w = normalize(truth.theta - prev.theta) / dt;
        let fix = loc.tick(world, truth, (v, w), dt, spec, rng)?;
        out.push(Sample {
            t: i as f64 * dt,
            truth: *truth,
            estimate: fix.estimate,
            raw: fix.raw.is_some(),
            raw_pose: fix.raw,
            tracked: fix.tracked,
            v,
            w,
            leg: None,
        });
        prev = *truth;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingConfig {
    pub dt: f64,
    pub speed: f64,
    pub turn_rate: f64,
    /// Fuse one scan every this many control periods.
    pub scan_every: usize,
    pub laser: LaserSpec,
    /// Lateral scanner offset from the robot centre, metres.
    pub laser_offset: f64,
    pub detection: DetectionSpec,
    pub sensor: SensorModel,
    pub localizer: LocalizerConfig,
    pub ceiling: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            dt: CONTROL_DT,
            speed: 0.3,
            turn_rate: 0.5,
            scan_every: 3,
            laser: LaserSpec::default(),
            laser_offset: 0.0,
            detection: DetectionSpec::default(),
            sensor: SensorModel::default(),
            // Mapping fuses raw fixes, so no smoothing lag enters the map.
            localizer: LocalizerConfig {
                window: 1,
                ..Default::default()
            },
            ceiling: SCAN_CEILING,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MappingRun {
    pub grid: OccupancyGrid,
    /// Marker poses as registered during the run.
    pub markers: MarkerDatabase,
    pub samples: Vec<Sample>,
    pub scans_fused: usize,
}

/// Checks that every marker can be chained from `anchor`: two markers are
/// linked when each lies within the other's tracking distance. A mapping
/// pass cannot register a marker outside the anchor's linked group.
pub fn check_marker_chain(markers: &MarkerDatabase, anchor: u32, spec: &DetectionSpec) -> Result<()> {
    let list = markers.to_vec();
    let tracking = |m: &Marker| spec.limits(m.size_cm()).map(|l| l.tracking).ok_or(Error::UnknownMarkerSize(m.id));
    let reach = list.iter().map(tracking).collect::<Result<Vec<f64>>>()?;
    let start = list.iter().position(|m| m.id == anchor).ok_or(Error::UnknownMarker(anchor))?;
    let mut linked = alloc::vec![false; list.len()];
    linked[start] = true;
    let mut stack = alloc::vec![start];
    while let Some(i) = stack.pop() {
        for j in 0..list.len() {
            let d = list[i].pose.distance_to(&list[j].pose);
            if !linked[j] && d <= reach[i].min(reach[j]) {
                linked[j] = true;
                stack.push(j);
            }
        }
    }
    match linked.iter().position(|&l| !l) {
        None => Ok(()),
        Some(k) => {
            let m = &list[k];
            let gap = list
                .iter()
                .zip(&linked)
                .filter(|(_, &l)| l)
                .map(|(o, _)| o.pose.distance_to(&m.pose))
                .fold(f64::INFINITY, f64::min);
            Err(Error::LocalizationLost(format!(
                "marker {} is {:.2} m from the nearest chained marker, beyond the {:.2} m tracking distance",
                m.id, gap, reach[k]
            )))
        }
    }
}

/// Drives a scripted route through `world`, localizing against markers
/// discovered on the way (starting from `anchor`, whose pose is taken as
/// known) and fusing laser scans at the marker-derived pose into `grid`.
pub fn run_mapping<R: Rng + ?Sized>(
    world: &World,
    route: &[(f64, f64)],
    anchor: u32,
    mut grid: OccupancyGrid,
    config: &MappingConfig,
    rng: &mut R,
) -> Result<MappingRun> {
    config.laser.validate()?;
    check_marker_chain(&world.markers, anchor, &config.detection)?;
    if config.scan_every == 0 {
        return Err(Error::InvalidArgument("scan_every must be at least 1".into()));
    }
    let start = *route.first().ok_or(Error::EmptyPlan)?;
    let initial_heading = match route.get(1) {
        Some(n) => (n.1 - start.1).atan2(n.0 - start.0),
        None => 0.0,
    };
    let path = scripted_path(route, initial_heading, config.speed, config.turn_rate, config.dt)?;
    let db = MarkerDatabase::new([*world.markers.get(anchor)?])?;
    let mut loc = Localizer::new(db, path[0], config.localizer)?;
    let mut samples = Vec::with_capacity(path.len());
    let mut scans_fused = 0;
    let mut prev = path[0];
    for (i, truth) in path.iter().enumerate() {
        let v = prev.distance_to(truth) / config.dt;
        let w = normalize(truth.theta - prev.theta) / config.dt;
        let fix = loc.tick(world, truth, (v, w), config.dt, &config.detection, rng)?;
        if let Some(raw) = fix.raw {
            if loc.db.len() < world.markers.len() {
                loc.discover(world, truth, &raw, &config.detection, rng)?;
            }
            if i % config.scan_every == 0 {
                let scan = simulate_scan(world, &scanner_pose(truth, config.laser_offset), &config.laser, rng)?;
                let clean = preprocess_scan(&scan, config.ceiling)?;
                let local = raytrace_local(&clean, grid.geometry.resolution);
                grid.fuse(&local, &scanner_pose(&raw, config.laser_offset), &config.sensor)?;
                scans_fused += 1;
            }
        }
        samples.push(Sample {
            t: i as f64 * config.dt,
            truth: *truth,
            estimate: fix.estimate,
            raw: fix.raw.is_some(),
            raw_pose: fix.raw,
            tracked: loc.tracked(),
            v,
            w,
            leg: None,
        });
        prev = *truth;
    }
    Ok(MappingRun {
        grid,
        markers: loc.db,
        samples,
        scans_fused,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigationConfig {
    pub dt: f64,
    pub localizer: LocalizerConfig,
    pub pursuit: PurePursuitConfig,
    pub limits: RobotLimits,
    /// Proportional gain of the in-place rotation controller.
    pub turn_gain: f64,
    pub max_turn_rate: f64,
    pub heading_tolerance: f64,
    /// Simulated seconds allowed for the whole route.
    pub max_time: f64,
}

impl Default for NavigationConfig {
    fn default() -> Self {
        Self {
            dt: CONTROL_DT,
            localizer: LocalizerConfig::default(),
            pursuit: PurePursuitConfig::default(),
            limits: RobotLimits::default(),
            turn_gain: 1.5,
            max_turn_rate: 0.6,
            heading_tolerance: 0.01,
            max_time: 600.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NavigationRun {
    pub samples: Vec<Sample>,
    /// Leg segments `(from, to)` in metres.
    pub legs: Vec<((f64, f64), (f64, f64))>,
}

/// Distance from `p` to the segment `a`–`b`.
pub fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a.0 + t * dx - p.0).hypot(a.1 + t * dy - p.1)
}

impl NavigationRun {
    /// Largest ground-truth distance from the leg being executed.
    pub fn max_cross_track(&self) -> f64 {
        self.samples
            .iter()
            .filter_map(|s| s.leg.map(|l| (s, self.legs[l])))
            .map(|(s, (a, b))| segment_distance((s.truth.x, s.truth.y), a, b))
            .fold(0.0, f64::max)
    }
}

enum Phase {
    Face(f64),
    Pursue(PathTracker),
    Align(f64),
}

/// Executes each leg between consecutive waypoints as rotate, pure pursuit,
/// rotate, under closed-loop marker localization.
pub fn run_route<R: Rng + ?Sized>(
    world: &World,
    db: MarkerDatabase,
    start: Pose2D,
    waypoints: &[Pose2D],
    config: &NavigationConfig,
    spec: &DetectionSpec,
    rng: &mut R,
) -> Result<NavigationRun> {
    config.pursuit.validate()?;
    if !world.is_free(start.x, start.y) {
        return Err(Error::InvalidPose { x: start.x, y: start.y });
    }
    let mut loc = Localizer::new(db, start, config.localizer)?;
    let mut state = RobotState {
        pose: start,
        v: 0.0,
        w: 0.0,
    };
    let mut legs = Vec::with_capacity(waypoints.len());
    let mut from = (start.x, start.y);
    for w in waypoints {
        legs.push((from, (w.x, w.y)));
        from = (w.x, w.y);
    }
    let mut samples = Vec::new();
    let mut t = 0.0;
    let mut cmd = (0.0, 0.0);
    for (leg, wp) in waypoints.iter().enumerate() {
        let (a, b) = legs[leg];
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let mut phase = if len > config.pursuit.goal_tolerance {
            Phase::Face((b.1 - a.1).atan2(b.0 - a.0))
        } else {
            Phase::Align(wp.theta)
        };
        loop {
            if t > config.max_time {
                return Err(Error::Timeout(config.max_time));
            }
            let fix = loc.tick(world, &state.pose, cmd, config.dt, spec, rng)?;
            let est = fix.estimate;
            let turn = |target: f64| {
                let e = normalize(target - est.theta);
                (e.abs() <= config.heading_tolerance, (config.turn_gain * e).clamp(-config.max_turn_rate, config.max_turn_rate))
            };
            let (v, w, next) = match &mut phase {
                Phase::Face(h) => {
                    let (done, w) = turn(*h);
                    if done {
                        let path = Polyline::new(alloc::vec![a, b])?;
                        (0.0, 0.0, Some(Phase::Pursue(PathTracker::new(path, config.pursuit)?)))
                    } else {
                        (0.0, w, None)
                    }
                }
                Phase::Pursue(tracker) => {
                    let c = tracker.step(&est)?;
                    if c.done {
                        (0.0, 0.0, Some(Phase::Align(wp.theta)))
                    } else {
                        (c.v, c.w, None)
                    }
                }
                Phase::Align(h) => {
                    let (done, w) = turn(*h);
                    (0.0, if done { 0.0 } else { w }, None)
                }
            };
            let finished = matches!(phase, Phase::Align(h) if turn(h).0);
            samples.push(Sample {
                t,
                truth: state.pose,
                estimate: est,
                raw: fix.raw.is_some(),
                raw_pose: fix.raw,
                tracked: fix.tracked,
                v,
                w,
                leg: Some(leg),
            });
            state = robot_step(world, &state, v, w, config.dt, &config.limits)?;
            cmd = (state.v, state.w);
            t += config.dt;
            if let Some(p) = next {
                phase = p;
            }
            if finished {
                break;
            }
        }
    }
    Ok(NavigationRun { samples, legs })
}
