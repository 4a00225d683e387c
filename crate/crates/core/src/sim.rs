//! Deterministic synthetic world: ground-truth obstacles and markers, a 2-D
//! laser scanner, the marker range model, the pan/tilt turret and unicycle
//! robot kinematics.
//!
//! All randomness flows through a caller-supplied [`Rng`]; seeding it with
//! [`seeded_rng`] makes every trace reproducible bit for bit.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::angle::{self, normalize};
use crate::error::{Error, Result};
use crate::geometry::{
    simulate_observation, MarkerDatabase, MarkerObservation, Pose2D, TurretAngles, PAN_SERVO_MAX_DEG,
    PAN_SERVO_MIN_DEG, TILT_MAX_DEG, TILT_MIN_DEG,
};
use crate::raster::{cast_ray, for_each_line_cell, BitGrid, GridGeometry};

/// The generator used throughout the simulator.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        // sigma is validated positive and finite, so construction cannot fail.
        Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Ground-truth environment.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    /// `true` where the cell is occupied.
    pub obstacles: BitGrid,
    pub geometry: GridGeometry,
    pub markers: MarkerDatabase,
}

impl World {
    pub fn new(obstacles: BitGrid, geometry: GridGeometry, markers: MarkerDatabase) -> Result<Self> {
        if obstacles.is_empty() {
            return Err(Error::InvalidArgument("world bitmap is empty".into()));
        }
        let world = Self {
            obstacles,
            geometry,
            markers,
        };
        for m in world.markers.iter() {
            if !world.is_free(m.pose.x, m.pose.y) {
                return Err(Error::InvalidArgument(format!(
                    "marker {} at ({:.3}, {:.3}) is not in free space",
                    m.id, m.pose.x, m.pose.y
                )));
            }
        }
        Ok(world)
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    /// Whether a world point lies inside the raster on a free cell.
    pub fn is_free(&self, x: f64, y: f64) -> bool {
        if !x.is_finite() || !y.is_finite() {
            return false;
        }
        let (cx, cy) = self.geometry.to_cell(x, y);
        matches!(self.obstacles.get_i(cx, cy), Some(false))
    }

    /// Free-space mask (complement of the obstacle bitmap).
    pub fn free_mask(&self) -> BitGrid {
        self.obstacles.map(|&o| !o)
    }

    /// True when the discrete line between the two points crosses only free
    /// cells.
    pub fn line_of_sight(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let ca = self.geometry.to_cell(a.0, a.1);
        let cb = self.geometry.to_cell(b.0, b.1);
        for_each_line_cell(ca, cb, |(x, y)| matches!(self.obstacles.get_i(x, y), Some(false)))
    }
}

/// 2-D laser scanner model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserSpec {
    /// Angular coverage in radians, centred on the scanner's forward axis.
    pub fov: f64,
    /// Metres; returns beyond this read as `+inf`.
    pub max_range: f64,
    pub beam_count: usize,
    /// Standard deviation of additive range noise, metres.
    pub range_sigma: f64,
    pub nan_rate: f64,
    pub inf_rate: f64,
}

impl Default for LaserSpec {
    fn default() -> Self {
        Self {
            fov: angle::deg(240.0),
            max_range: 3.5,
            beam_count: 481,
            range_sigma: 0.0,
            nan_rate: 0.0,
            inf_rate: 0.0,
        }
    }
}

impl LaserSpec {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !(self.fov > 0.0 && self.fov <= 2.0 * PI + 1e-12) {
            return Err(Error::InvalidArgument("laser fov must be in (0, 360°]".into()));
        }
        if !(self.max_range > 0.0) || !self.max_range.is_finite() {
            return Err(Error::InvalidArgument("laser max_range must be positive".into()));
        }
        if self.beam_count == 0 {
            return Err(Error::InvalidArgument("laser needs at least one beam".into()));
        }
        if !(self.range_sigma >= 0.0) || !self.range_sigma.is_finite() {
            return Err(Error::InvalidArgument("laser range sigma must be >= 0".into()));
        }
        if !rate_ok(self.nan_rate) || !rate_ok(self.inf_rate) || self.nan_rate + self.inf_rate > 1.0 {
            return Err(Error::InvalidArgument("laser corruption rates must be probabilities".into()));
        }
        Ok(())
    }

    /// Angle of the first (rightmost) beam relative to the scanner axis.
    pub fn angle_min(&self) -> f64 {
        -self.fov / 2.0
    }

    pub fn angle_increment(&self) -> f64 {
        if self.beam_count < 2 {
            0.0
        } else if self.fov >= 2.0 * PI - 1e-12 {
            self.fov / self.beam_count as f64
        } else {
            self.fov / (self.beam_count - 1) as f64
        }
    }
}

/// One sweep of range readings, ordered anticlockwise from the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub ranges: Vec<f64>,
}

impl Scan {
    pub fn bearing(&self, i: usize) -> f64 {
        self.angle_min + self.angle_increment * i as f64
    }
}

/// Pose of the laser scanner given the robot pose; the scanner sits
/// `offset` metres behind the turret axis.
pub fn scanner_pose(robot: &Pose2D, offset: f64) -> Pose2D {
    let (x, y) = robot.transform_point(0.0, -offset);
    Pose2D::new(x, y, robot.theta)
}

/// Simulates one laser sweep from `scanner`.
pub fn simulate_scan<R: Rng + ?Sized>(world: &World, scanner: &Pose2D, spec: &LaserSpec, rng: &mut R) -> Result<Scan> {
    spec.validate()?;
    if !scanner.is_finite() || !world.is_free(scanner.x, scanner.y) {
        return Err(Error::InvalidPose {
            x: scanner.x,
            y: scanner.y,
        });
    }
    let res = world.resolution();
    let start = world.geometry.to_cell_f(scanner.x, scanner.y);
    let (w, h) = (world.obstacles.width(), world.obstacles.height());
    let angle_min = spec.angle_min();
    let inc = spec.angle_increment();
    let mut ranges = Vec::with_capacity(spec.beam_count);
    for i in 0..spec.beam_count {
        let a = scanner.theta + angle_min + inc * i as f64;
        let hit = cast_ray(w, h, start, a, spec.max_range * res, |x, y| *world.obstacles.get(x, y));
        let noise = gaussian(rng, spec.range_sigma);
        let u: f64 = rng.random();
        let mut r = match hit {
            Some(d) if d / res <= spec.max_range => (d / res + noise).max(0.0),
            _ => f64::INFINITY,
        };
        if u < spec.nan_rate {
            r = f64::NAN;
        } else if u < spec.nan_rate + spec.inf_rate {
            r = f64::INFINITY;
        }
        ranges.push(r);
    }
    Ok(Scan {
        angle_min,
        angle_increment: inc,
        ranges,
    })
}

/// Measured detection limits for one marker size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeLimits {
    pub size_cm: u32,
    /// Farthest distance with a pose estimate, metres.
    pub tracking: f64,
    /// Farthest distance at which the marker is detected at all, metres.
    pub cutoff: f64,
}

/// Range test results for the four printed marker sizes.
pub const MARKER_RANGE_TABLE: [RangeLimits; 4] = [
    RangeLimits {
        size_cm: 10,
        tracking: 2.1,
        cutoff: 4.8,
    },
    RangeLimits {
        size_cm: 20,
        tracking: 4.25,
        cutoff: 8.35,
    },
    RangeLimits {
        size_cm: 30,
        tracking: 6.3,
        cutoff: 11.5,
    },
    RangeLimits {
        size_cm: 40,
        tracking: 8.5,
        cutoff: 14.9,
    },
];

/// Parametric stand-in for the camera detection pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSpec {
    pub ranges: Vec<RangeLimits>,
    /// Horizontal camera field of view, radians.
    pub camera_fov: f64,
    /// Largest angle between a face normal and the line to the camera at
    /// which the face is still readable, radians.
    pub face_half_angle: f64,
    /// Probability that a marker within tracking range yields a pose in a
    /// given frame.
    pub persistence: f64,
    /// Height of the markers above the camera, metres.
    pub marker_height: f64,
    /// Noise on the floor-plane range of a pose estimate, metres.
    pub range_sigma: f64,
    /// Noise on the reported marker yaw, radians.
    pub yaw_sigma: f64,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        Self {
            ranges: MARKER_RANGE_TABLE.to_vec(),
            camera_fov: angle::deg(78.0),
            face_half_angle: angle::deg(80.0),
            persistence: 1.0,
            marker_height: 2.0,
            range_sigma: 0.0,
            yaw_sigma: 0.0,
        }
    }
}

impl DetectionSpec {
    pub fn validate(&self) -> Result<()> {
        for r in &self.ranges {
            if !(r.tracking > 0.0 && r.tracking < r.cutoff && r.cutoff.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "range limits for {} cm must satisfy 0 < tracking < cutoff",
                    r.size_cm
                )));
            }
        }
        if !(self.camera_fov > 0.0 && self.camera_fov <= 2.0 * PI) {
            return Err(Error::InvalidArgument("camera fov must be in (0, 360°]".into()));
        }
        if !(self.face_half_angle > 0.0 && self.face_half_angle <= PI) {
            return Err(Error::InvalidArgument("face half-angle must be in (0, 180°]".into()));
        }
        if !(0.0..=1.0).contains(&self.persistence) {
            return Err(Error::InvalidArgument("persistence must be a probability".into()));
        }
        if !self.marker_height.is_finite()
            || !(self.range_sigma >= 0.0 && self.range_sigma.is_finite())
            || !(self.yaw_sigma >= 0.0 && self.yaw_sigma.is_finite())
        {
            return Err(Error::InvalidArgument("marker height and noise must be finite".into()));
        }
        Ok(())
    }

    pub fn limits(&self, size_cm: u32) -> Option<RangeLimits> {
        self.ranges.iter().find(|r| r.size_cm == size_cm).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Visibility {
    /// Detected with a usable pose estimate.
    Tracked,
    /// Detected, but too far for a pose estimate.
    DetectedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub id: u32,
    pub face: u8,
    pub state: Visibility,
    /// Floor-plane distance from camera to marker, metres.
    pub distance: f64,
    /// Present only for tracked markers.
    pub observation: Option<MarkerObservation>,
    /// Turret angles that centre the marker in the image.
    pub turret: TurretAngles,
}

/// Pure range gate: tracked within the tracking distance, detected-only up to
/// the cutoff, invisible beyond. Both limits are inclusive.
pub fn classify_range(distance: f64, limits: &RangeLimits) -> Option<Visibility> {
    if distance <= limits.tracking {
        Some(Visibility::Tracked)
    } else if distance <= limits.cutoff {
        Some(Visibility::DetectedOnly)
    } else {
        None
    }
}

/// Index of the face best aligned with the viewer, if any face is within the
/// readable half-angle.
fn best_face(marker: &crate::geometry::Marker, from: (f64, f64), half_angle: f64) -> Option<u8> {
    let to_viewer = (from.1 - marker.pose.y).atan2(from.0 - marker.pose.x);
    (0..marker.faces)
        .map(|f| (f, angle::diff(to_viewer, marker.face_orientation(f)).abs()))
        .filter(|&(_, a)| a <= half_angle + 1e-12)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(f, _)| f)
}

/// Markers visible to a camera on the turret of `robot` with the given pan,
/// in ascending id order. The camera sits on the robot's vertical axis.
pub fn simulate_marker_detection<R: Rng + ?Sized>(
    world: &World,
    robot: &Pose2D,
    pan: f64,
    spec: &DetectionSpec,
    rng: &mut R,
) -> Result<Vec<Detection>> {
    spec.validate()?;
    if !robot.is_finite() || !pan.is_finite() {
        return Err(Error::NonFinite("camera pose"));
    }
    let look = robot.theta + pan;
    let mut out = Vec::new();
    for m in world.markers.iter() {
        let limits = spec.limits(m.size_cm()).ok_or(Error::UnknownMarkerSize(m.id))?;
        let dx = m.pose.x - robot.x;
        let dy = m.pose.y - robot.y;
        let distance = dx.hypot(dy);
        let Some(mut state) = classify_range(distance, &limits) else {
            continue;
        };
        if distance > 0.0 && angle::diff(dy.atan2(dx), look).abs() > spec.camera_fov / 2.0 {
            continue;
        }
        let Some(face) = best_face(m, (robot.x, robot.y), spec.face_half_angle) else {
            continue;
        };
        if !world.line_of_sight((robot.x, robot.y), (m.pose.x, m.pose.y)) {
            continue;
        }
        let (mut obs, mut turret) = simulate_observation(robot, &m.face_pose(face), spec.marker_height)?;
        let range_noise = gaussian(rng, spec.range_sigma);
        let yaw_noise = gaussian(rng, spec.yaw_sigma);
        let keep: f64 = rng.random();
        if state == Visibility::Tracked && (keep >= spec.persistence || !turret.pan_within_limits()) {
            state = Visibility::DetectedOnly;
        }
        let observation = if state == Visibility::Tracked {
            let r = (distance + range_noise).max(0.0);
            obs.t_z = r.hypot(spec.marker_height);
            obs.r_y = normalize(obs.r_y + yaw_noise);
            turret.tilt = spec.marker_height.atan2(r);
            Some(obs)
        } else {
            None
        };
        out.push(Detection {
            id: m.id,
            face,
            state,
            distance,
            observation,
            turret,
        });
    }
    Ok(out)
}

/// Discrete PID controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    integral: f64,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            integral: 0.0,
            prev_error: None,
        }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = None;
    }

    /// Rectangle-rule integral, backward-difference derivative (zero on the
    /// first step).
    pub fn step(&mut self, error: f64, dt: f64) -> Result<f64> {
        if !error.is_finite() {
            return Err(Error::NonFinite("pid error"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        self.integral += error * dt;
        let derivative = self.prev_error.map_or(0.0, |p| (error - p) / dt);
        self.prev_error = Some(error);
        Ok(self.kp * error + self.ki * self.integral + self.kd * derivative)
    }
}

pub const PAN_UNITS: (f64, f64) = (100.0, 3980.0);
pub const TILT_UNITS: (f64, f64) = (1248.0, 3072.0);

/// Maps a pan command in servo degrees onto the servo travel. Commands past
/// either end wrap to the opposite end, so the turret swings the long way
/// round instead of crossing the dead zone.
pub fn wrap_pan_command(pan_servo_deg: f64) -> f64 {
    let p = pan_servo_deg.rem_euclid(360.0);
    if p > PAN_SERVO_MAX_DEG {
        PAN_SERVO_MIN_DEG
    } else if p < PAN_SERVO_MIN_DEG {
        PAN_SERVO_MAX_DEG
    } else {
        p
    }
}

pub fn clamp_tilt_command(tilt_deg: f64) -> f64 {
    tilt_deg.clamp(TILT_MIN_DEG, TILT_MAX_DEG)
}

fn to_units(v: f64, lo: f64, hi: f64, units: (f64, f64)) -> f64 {
    units.0 + (v - lo) / (hi - lo) * (units.1 - units.0)
}

/// Pan/tilt servo pair driven by one PID loop per axis. Angles are in servo
/// degrees: pan in `[10, 350]`, tilt in `[-70, 90]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurretServo {
    pub pan_deg: f64,
    pub tilt_deg: f64,
    pub target_pan_deg: f64,
    pub target_tilt_deg: f64,
    pub pan_pid: Pid,
    pub tilt_pid: Pid,
}

impl Default for TurretServo {
    fn default() -> Self {
        Self::new(Pid::new(0.7, 0.0, 0.0))
    }
}

impl TurretServo {
    /// Turret facing straight ahead and level, both axes using `pid`.
    pub fn new(pid: Pid) -> Self {
        Self {
            pan_deg: 180.0,
            tilt_deg: 0.0,
            target_pan_deg: 180.0,
            target_tilt_deg: 0.0,
            pan_pid: pid,
            tilt_pid: pid,
        }
    }

    /// Sets new targets in servo degrees, applying the wrap and clamp rules.
    pub fn command(&mut self, pan_servo_deg: f64, tilt_deg: f64) -> Result<()> {
        if !pan_servo_deg.is_finite() || !tilt_deg.is_finite() {
            return Err(Error::NonFinite("turret command"));
        }
        self.target_pan_deg = wrap_pan_command(pan_servo_deg);
        self.target_tilt_deg = clamp_tilt_command(tilt_deg);
        Ok(())
    }

    /// Commands robot-relative angles (radians).
    pub fn point_at(&mut self, pan: f64, tilt: f64) -> Result<()> {
        self.command(angle::to_deg(normalize(pan)) + 180.0, angle::to_deg(tilt))
    }

    /// Advances both axes by one control period.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let u_pan = self.pan_pid.step(self.target_pan_deg - self.pan_deg, dt)?;
        let u_tilt = self.tilt_pid.step(self.target_tilt_deg - self.tilt_deg, dt)?;
        self.pan_deg = (self.pan_deg + u_pan).clamp(PAN_SERVO_MIN_DEG, PAN_SERVO_MAX_DEG);
        self.tilt_deg = (self.tilt_deg + u_tilt).clamp(TILT_MIN_DEG, TILT_MAX_DEG);
        Ok(())
    }

    pub fn angles(&self) -> TurretAngles {
        TurretAngles::from_servo_degrees(self.pan_deg, self.tilt_deg)
    }

    /// Raw servo positions (pan, tilt).
    pub fn units(&self) -> (f64, f64) {
        (
            to_units(self.pan_deg, PAN_SERVO_MIN_DEG, PAN_SERVO_MAX_DEG, PAN_UNITS),
            to_units(self.tilt_deg, TILT_MIN_DEG, TILT_MAX_DEG, TILT_UNITS),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotLimits {
    pub max_linear: f64,
    pub max_angular: f64,
}

impl Default for RobotLimits {
    fn default() -> Self {
        Self {
            max_linear: 1.0,
            max_angular: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub pose: Pose2D,
    pub v: f64,
    pub w: f64,
}

/// Exact unicycle motion under constant velocities for `dt` seconds.
pub fn integrate_unicycle(pose: &Pose2D, v: f64, w: f64, dt: f64) -> Pose2D {
    let th = pose.theta;
    if w.abs() < 1e-12 {
        let (s, c) = th.sin_cos();
        Pose2D::new(pose.x + v * dt * c, pose.y + v * dt * s, th)
    } else {
        let th1 = th + w * dt;
        let k = v / w;
        Pose2D::new(
            pose.x + k * (th1.sin() - th.sin()),
            pose.y - k * (th1.cos() - th.cos()),
            th1,
        )
    }
}

/// Moves the robot under clamped velocity commands. A step that would end in
/// or cross an obstacle is rejected and the state is left untouched.
pub fn robot_step(
    world: &World,
    state: &RobotState,
    v_cmd: f64,
    w_cmd: f64,
    dt: f64,
    limits: &RobotLimits,
) -> Result<RobotState> {
    if !v_cmd.is_finite() || !w_cmd.is_finite() {
        return Err(Error::NonFinite("velocity command"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let v = v_cmd.clamp(-limits.max_linear, limits.max_linear);
    let w = w_cmd.clamp(-limits.max_angular, limits.max_angular);
    let pose = integrate_unicycle(&state.pose, v, w, dt);
    if !world.is_free(pose.x, pose.y) || !world.line_of_sight((state.pose.x, state.pose.y), (pose.x, pose.y)) {
        return Err(Error::Collision { x: pose.x, y: pose.y });
    }
    Ok(RobotState { pose, v, w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{robot_pose_from_marker, Marker};
    use alloc::vec;
    use crate::raster::Grid;

    /// `size_m` square room with one-cell walls, origin at the lower-left
    /// interior corner, 20 cells per metre.
    fn room(size_m: f64, markers: Vec<Marker>) -> World {
        let n = (size_m * 20.0) as usize + 2;
        let obstacles = Grid::from_fn(n, n, |x, y| x == 0 || y == 0 || x == n - 1 || y == n - 1);
        let geometry = GridGeometry::new(20.0, (1.0, 1.0)).unwrap();
        World::new(obstacles, geometry, MarkerDatabase::new(markers).unwrap()).unwrap()
    }

    #[test]
    fn perpendicular_wall_range() {
        let w = room(4.0, vec![]);
        let spec = LaserSpec {
            fov: angle::deg(180.0),
            beam_count: 3,
            max_range: 10.0,
            ..Default::default()
        };
        let scan = simulate_scan(&w, &Pose2D::new(3.0, 2.0, 0.0), &spec, &mut seeded_rng(1)).unwrap();
        // Middle beam points at the east wall, whose face is at x = 4.
        assert!((scan.ranges[1] - 1.0).abs() < 1e-9);
        // Rightmost beam first: pointing -y towards the wall at y = 0.
        assert!((scan.ranges[0] - 2.0).abs() < 1e-9);
        assert!((scan.ranges[2] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_and_invalid_pose() {
        let w = room(10.0, vec![]);
        let scan = simulate_scan(&w, &Pose2D::new(5.0, 5.0, 0.0), &LaserSpec::default(), &mut seeded_rng(0)).unwrap();
        assert!(scan.ranges.iter().all(|r| r.is_infinite()));
        let err = simulate_scan(&w, &Pose2D::new(-0.02, 5.0, 0.0), &LaserSpec::default(), &mut seeded_rng(0));
        assert!(matches!(err, Err(Error::InvalidPose { .. })));
    }

    #[test]
    fn scan_is_deterministic_per_seed() {
        let w = room(3.0, vec![]);
        let spec = LaserSpec {
            range_sigma: 0.02,
            nan_rate: 0.05,
            inf_rate: 0.05,
            ..Default::default()
        };
        let p = Pose2D::new(1.2, 1.7, 0.4);
        let a = simulate_scan(&w, &p, &spec, &mut seeded_rng(7)).unwrap();
        let b = simulate_scan(&w, &p, &spec, &mut seeded_rng(7)).unwrap();
        let bits = |s: &Scan| s.ranges.iter().map(|r| r.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(a.ranges.iter().any(|r| r.is_nan()));
    }

    fn marker_at(x: f64, y: f64, theta_deg: f64, size: f64) -> Marker {
        Marker::new(0, Pose2D::new(x, y, angle::deg(theta_deg)), 1, size).unwrap()
    }

    fn detect_at(distance: f64) -> Option<Visibility> {
        let w = room(12.0, vec![marker_at(11.0, 6.0, 180.0, 0.2)]);
        let robot = Pose2D::new(11.0 - distance, 6.0, 0.0);
        let d = simulate_marker_detection(&w, &robot, 0.0, &DetectionSpec::default(), &mut seeded_rng(0)).unwrap();
        d.first().map(|d| d.state)
    }

    #[test]
    fn range_model_twenty_cm() {
        assert_eq!(detect_at(4.0), Some(Visibility::Tracked));
        assert_eq!(detect_at(5.0), Some(Visibility::DetectedOnly));
        assert_eq!(detect_at(9.0), None);
    }

    #[test]
    fn tracked_observation_recovers_pose() {
        let w = room(6.0, vec![marker_at(5.0, 3.0, 160.0, 0.2)]);
        let robot = Pose2D::new(2.0, 2.5, 0.3);
        let d = simulate_marker_detection(&w, &robot, -0.1, &DetectionSpec::default(), &mut seeded_rng(0)).unwrap();
        let det = d[0];
        assert_eq!(det.state, Visibility::Tracked);
        let face = w.markers.get(0).unwrap().face_pose(det.face);
        let p = robot_pose_from_marker(&det.observation.unwrap(), &det.turret, &face).unwrap();
        assert!(p.distance_to(&robot) < 1e-9);
        assert!(angle::diff(p.theta, robot.theta).abs() < 1e-9);
    }

    #[test]
    fn occlusion_fov_and_face_angle() {
        let mut obstacles = room(6.0, vec![]).obstacles;
        for y in 0..obstacles.height() {
            obstacles.set(60, y, y < 70);
        }
        let geometry = GridGeometry::new(20.0, (1.0, 1.0)).unwrap();
        let markers = MarkerDatabase::new([marker_at(5.0, 1.0, 180.0, 0.2)]).unwrap();
        let w = World::new(obstacles, geometry, markers).unwrap();
        let spec = DetectionSpec::default();
        let robot = Pose2D::new(1.0, 1.0, 0.0);
        assert!(simulate_marker_detection(&w, &robot, 0.0, &spec, &mut seeded_rng(0)).unwrap().is_empty());

        let w = room(6.0, vec![marker_at(5.0, 3.0, 180.0, 0.2)]);
        let robot = Pose2D::new(2.0, 3.0, 0.0);
        assert_eq!(simulate_marker_detection(&w, &robot, 0.0, &spec, &mut seeded_rng(0)).unwrap().len(), 1);
        // Looking away from it.
        assert!(simulate_marker_detection(&w, &robot, 1.5, &spec, &mut seeded_rng(0)).unwrap().is_empty());
        // Face turned 85° away from the camera.
        let w = room(6.0, vec![marker_at(5.0, 3.0, 95.0, 0.2)]);
        assert!(simulate_marker_detection(&w, &robot, 0.0, &spec, &mut seeded_rng(0)).unwrap().is_empty());
    }

    #[test]
    fn unknown_size_is_an_error() {
        let w = room(4.0, vec![marker_at(3.0, 2.0, 180.0, 0.15)]);
        let r = simulate_marker_detection(&w, &Pose2D::new(1.0, 2.0, 0.0), 0.0, &DetectionSpec::default(), &mut seeded_rng(0));
        assert_eq!(r.unwrap_err(), Error::UnknownMarkerSize(0));
    }

    #[test]
    fn pid_examples() {
        let mut p = Pid::new(0.7, 0.0, 0.0);
        assert!((p.step(10.0, 0.1).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(Pid::new(0.7, 0.0, 0.0).step(0.0, 0.1).unwrap(), 0.0);
        let mut p = Pid::new(1.0, 1.0, 0.0);
        assert_eq!(p.step(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(p.step(1.0, 1.0).unwrap(), 3.0);
        assert!(p.step(f64::NAN, 1.0).is_err());
        assert!(p.step(1.0, 0.0).is_err());
    }

    #[test]
    fn turret_wrap_and_clamp() {
        let mut t = TurretServo::default();
        t.pan_deg = 350.0;
        t.command(370.0, 120.0).unwrap();
        assert_eq!(t.target_pan_deg, 10.0);
        assert_eq!(t.target_tilt_deg, 90.0);
        t.step(0.1).unwrap();
        // Moves down towards 10, the long way round.
        assert!(t.pan_deg < 350.0);
        assert_eq!(wrap_pan_command(5.0), 350.0);
        assert_eq!(wrap_pan_command(200.0), 200.0);
        let mut still = TurretServo::default();
        still.step(0.1).unwrap();
        assert_eq!((still.pan_deg, still.tilt_deg), (180.0, 0.0));
    }

    #[test]
    fn servo_units_span() {
        let mut t = TurretServo::default();
        t.pan_deg = 10.0;
        t.tilt_deg = -70.0;
        assert_eq!(t.units(), (100.0, 1248.0));
        t.pan_deg = 350.0;
        t.tilt_deg = 90.0;
        assert_eq!(t.units(), (3980.0, 3072.0));
    }

    #[test]
    fn unicycle_examples() {
        let w = room(10.0, vec![]);
        let lim = RobotLimits::default();
        let s = RobotState {
            pose: Pose2D::new(2.0, 2.0, 0.0),
            ..Default::default()
        };
        let s1 = robot_step(&w, &s, 1.0, 0.0, 1.0, &lim).unwrap();
        assert!((s1.pose.x - 3.0).abs() < 1e-12 && s1.pose.y == 2.0);
        let s2 = robot_step(&w, &s, 0.0, PI / 2.0, 1.0, &lim).unwrap();
        assert!((s2.pose.theta - PI / 2.0).abs() < 1e-12);
        // Full circle of radius 1 in small steps returns to the start.
        let mut p = Pose2D::new(5.0, 5.0, 0.0);
        let n = 1000;
        for _ in 0..n {
            p = integrate_unicycle(&p, 1.0, 1.0, 2.0 * PI / n as f64);
        }
        assert!((p.x - 5.0).abs() < 1e-9 && (p.y - 5.0).abs() < 1e-9);
        // Driving into the wall is refused.
        let near = RobotState {
            pose: Pose2D::new(9.9, 5.0, 0.0),
            ..Default::default()
        };
        assert!(matches!(robot_step(&w, &near, 1.0, 0.0, 1.0, &lim), Err(Error::Collision { .. })));
    }
}
