//! Frames and transforms linking the turret camera, laser, robot, markers and
//! the global map.
//!
//! Conventions:
//!
//! * A marker face with orientation `θ_m` has outward normal `(cos θ_m, sin θ_m)`.
//! * The turret pan is measured anticlockwise from the robot heading, so the
//!   camera looks along world direction `heading + pan`.
//! * `MarkerObservation::r_y` is the marker yaw reported with the observation.
//!   It is defined so that the robot heading recovers as
//!   `pan + r_y + θ_m + π`.
//! * The camera sits on the robot centre; the turret keeps the tracked marker
//!   centred, so the planar bearing of the marker equals the pan.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::angle::{self, normalize};
use crate::error::{Error, Result};

/// Planar pose. `theta` is kept in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// `self ⊕ other`: `other` expressed in the frame of `self`, mapped to the
    /// parent frame.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            -(c * self.x + s * self.y),
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Maps a point given in this pose's frame into the parent frame.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }
}

/// Marker pose in the camera frame: translation (metres) and rotation (radians).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MarkerObservation {
    pub t_x: f64,
    pub t_y: f64,
    pub t_z: f64,
    pub r_x: f64,
    pub r_y: f64,
    pub r_z: f64,
}

impl MarkerObservation {
    fn validate(&self) -> Result<()> {
        let all = [self.t_x, self.t_y, self.t_z, self.r_x, self.r_y, self.r_z];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("marker observation"));
        }
        if self.t_z <= 0.0 {
            return Err(Error::MarkerBehindCamera(self.t_z));
        }
        Ok(())
    }
}

pub const PAN_SERVO_MIN_DEG: f64 = 10.0;
pub const PAN_SERVO_MAX_DEG: f64 = 350.0;
pub const TILT_MIN_DEG: f64 = -70.0;
pub const TILT_MAX_DEG: f64 = 90.0;

/// Turret angles in radians. `pan` is relative to the robot heading
/// (anticlockwise); the pan servo measures the same angle offset by 180°, so
/// its `[10°, 350°]` travel corresponds to `|pan| ≤ 170°`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TurretAngles {
    pub pan: f64,
    pub tilt: f64,
}

impl TurretAngles {
    /// Builds a checked pair: both angles must be finite and inside the
    /// mechanical limits.
    pub fn new(pan: f64, tilt: f64) -> Result<Self> {
        let t = Self {
            pan: normalize(pan),
            tilt,
        };
        t.check_finite()?;
        if !t.pan_within_limits() {
            return Err(Error::TurretLimit(format!(
                "pan {:.3}° outside servo travel",
                angle::to_deg(pan)
            )));
        }
        t.check_tilt()?;
        Ok(t)
    }

    pub fn from_degrees(pan_deg: f64, tilt_deg: f64) -> Result<Self> {
        Self::new(angle::deg(pan_deg), angle::deg(tilt_deg))
    }

    /// Pan expressed in pan-servo degrees, in `[0, 360)`.
    pub fn pan_servo_deg(&self) -> f64 {
        let d = angle::to_deg(normalize(self.pan)) + 180.0;
        if d >= 360.0 {
            d - 360.0
        } else {
            d
        }
    }

    pub fn from_servo_degrees(pan_servo_deg: f64, tilt_deg: f64) -> Self {
        Self {
            pan: normalize(angle::deg(pan_servo_deg - 180.0)),
            tilt: angle::deg(tilt_deg),
        }
    }

    pub fn pan_within_limits(&self) -> bool {
        let d = self.pan_servo_deg();
        // One-ulp slack so the ±170° endpoints survive the degree round trip.
        (PAN_SERVO_MIN_DEG - 1e-9..=PAN_SERVO_MAX_DEG + 1e-9).contains(&d)
    }

    fn check_finite(&self) -> Result<()> {
        if !self.pan.is_finite() || !self.tilt.is_finite() {
            return Err(Error::NonFinite("turret angles"));
        }
        Ok(())
    }

    fn check_tilt(&self) -> Result<()> {
        let t = angle::to_deg(self.tilt);
        if !(TILT_MIN_DEG - 1e-9..=TILT_MAX_DEG + 1e-9).contains(&t) {
            return Err(Error::TurretLimit(format!("tilt {t:.3}° outside [-70°, 90°]")));
        }
        Ok(())
    }
}

/// Range and bearing of the tracked marker projected on the floor plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarFix {
    pub r: f64,
    pub bearing: f64,
}

/// Homogeneous 3×3 planar rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2D {
    pub m: [[f64; 3]; 3],
}

impl Transform2D {
    pub const IDENTITY: Transform2D = Transform2D {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn new(angle: f64, tx: f64, ty: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]],
        }
    }

    pub fn from_pose(p: &Pose2D) -> Self {
        Self::new(p.theta, p.x, p.y)
    }

    pub fn to_pose(&self) -> Pose2D {
        Pose2D::new(self.m[0][2], self.m[1][2], self.angle())
    }

    pub fn angle(&self) -> f64 {
        self.m[1][0].atan2(self.m[0][0])
    }

    pub fn translation(&self) -> (f64, f64) {
        (self.m[0][2], self.m[1][2])
    }

    pub fn compose(&self, rhs: &Transform2D) -> Transform2D {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Transform2D { m }
    }

    /// Rigid inverse (transpose of the rotation block).
    pub fn inverse(&self) -> Transform2D {
        let (c, s) = (self.m[0][0], self.m[1][0]);
        let (tx, ty) = self.translation();
        Transform2D {
            m: [
                [c, s, -(c * tx + s * ty)],
                [-s, c, s * tx - c * ty],
                [0.0, 0.0, 1.0],
            ],
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.m[0][0] * x + self.m[0][1] * y + self.m[0][2],
            self.m[1][0] * x + self.m[1][1] * y + self.m[1][2],
        )
    }

    /// Rotation block orthonormal with determinant +1, bottom row `[0 0 1]`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let [a, b] = [self.m[0][0], self.m[0][1]];
        let [c, d] = [self.m[1][0], self.m[1][1]];
        (a * a + c * c - 1.0).abs() <= tol
            && (b * b + d * d - 1.0).abs() <= tol
            && (a * b + c * d).abs() <= tol
            && (a * d - b * c - 1.0).abs() <= tol
            && self.m[2] == [0.0, 0.0, 1.0]
    }

    pub fn max_abs_diff(&self, other: &Transform2D) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }
}

/// Homogeneous 4×4 spatial rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform3D {
    pub m: [[f64; 4]; 4],
}

impl Transform3D {
    pub const IDENTITY: Transform3D = Transform3D {
        m: [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
    };

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        let mut t = Self::IDENTITY;
        t.m[0][3] = x;
        t.m[1][3] = y;
        t.m[2][3] = z;
        t
    }

    pub fn rot_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        let mut t = Self::IDENTITY;
        t.m[0][0] = c;
        t.m[0][1] = -s;
        t.m[1][0] = s;
        t.m[1][1] = c;
        t
    }

    pub fn rot_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        let mut t = Self::IDENTITY;
        t.m[1][1] = c;
        t.m[1][2] = -s;
        t.m[2][1] = s;
        t.m[2][2] = c;
        t
    }

    pub fn compose(&self, rhs: &Transform3D) -> Transform3D {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Transform3D { m }
    }

    pub fn inverse(&self) -> Transform3D {
        let mut out = Self::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[j][i];
            }
        }
        for i in 0..3 {
            out.m[i][3] = -(0..3).map(|k| out.m[i][k] * self.m[k][3]).sum::<f64>();
        }
        out
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.m[i][0] * p[0] + self.m[i][1] * p[1] + self.m[i][2] * p[2] + self.m[i][3];
        }
        out
    }

    pub fn is_rigid(&self, tol: f64) -> bool {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| self.m[k][i] * self.m[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > tol {
                    return false;
                }
            }
        }
        let r = &self.m;
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        (det - 1.0).abs() <= tol && self.m[3] == [0.0, 0.0, 0.0, 1.0]
    }

    pub fn max_abs_diff(&self, other: &Transform3D) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }
}

/// An installed marker unit. `pose.theta` is the orientation of face 0; a
/// two-faced unit adds the opposite face, a cuboid adds all four sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub id: u32,
    pub pose: Pose2D,
    pub faces: u8,
    /// Edge length in metres.
    pub size: f64,
}

impl Marker {
    pub fn new(id: u32, pose: Pose2D, faces: u8, size: f64) -> Result<Self> {
        if !matches!(faces, 1 | 2 | 4) {
            return Err(Error::InvalidArgument(format!(
                "marker {id}: faces must be 1, 2 or 4, got {faces}"
            )));
        }
        if !(size > 0.0) || !pose.is_finite() {
            return Err(Error::InvalidArgument(format!("marker {id}: bad size or pose")));
        }
        Ok(Self { id, pose, faces, size })
    }

    pub fn size_cm(&self) -> u32 {
        (self.size * 100.0).round() as u32
    }

    pub fn face_orientation(&self, face: u8) -> f64 {
        let step = 2.0 * PI / f64::from(self.faces.max(1));
        normalize(self.pose.theta + step * f64::from(face % self.faces.max(1)))
    }

    /// Pose of one face: the unit position with that face's orientation.
    pub fn face_pose(&self, face: u8) -> Pose2D {
        Pose2D::new(self.pose.x, self.pose.y, self.face_orientation(face))
    }
}

/// Markers indexed by id. Iteration is in ascending id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkerDatabase {
    markers: BTreeMap<u32, Marker>,
}

impl MarkerDatabase {
    pub fn new<I: IntoIterator<Item = Marker>>(markers: I) -> Result<Self> {
        let mut db = Self::default();
        for m in markers {
            db.insert(m)?;
        }
        Ok(db)
    }

    pub fn insert(&mut self, marker: Marker) -> Result<()> {
        if self.markers.contains_key(&marker.id) {
            return Err(Error::DuplicateMarker(marker.id));
        }
        self.markers.insert(marker.id, marker);
        Ok(())
    }

    pub fn get(&self, id: u32) -> Result<&Marker> {
        self.markers.get(&id).ok_or(Error::UnknownMarker(id))
    }

    pub fn contains(&self, id: u32) -> bool {
        self.markers.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Marker> {
        self.markers.values()
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn to_vec(&self) -> Vec<Marker> {
        self.markers.values().copied().collect()
    }

    /// Robot pose from an observation of face `face` of marker `id`.
    pub fn locate(
        &self,
        id: u32,
        face: u8,
        obs: &MarkerObservation,
        turret: &TurretAngles,
    ) -> Result<Pose2D> {
        let marker = self.get(id)?;
        robot_pose_from_marker(obs, turret, &marker.face_pose(face))
    }
}

/// Projects the camera-frame distance of a centred marker onto the floor plane.
pub fn project_to_plane(obs: &MarkerObservation, turret: &TurretAngles) -> Result<PolarFix> {
    obs.validate()?;
    turret.check_finite()?;
    turret.check_tilt()?;
    Ok(PolarFix {
        r: obs.t_z * turret.tilt.cos(),
        bearing: turret.pan,
    })
}

/// Recovers the robot pose from an observation of a marker face whose global
/// pose is `face`.
///
/// The heading is `pan + r_y + θ_m + π`; the robot then sits at planar range
/// `r` behind the camera ray, i.e. at `face - r·(cos(h + pan), sin(h + pan))`.
pub fn robot_pose_from_marker(
    obs: &MarkerObservation,
    turret: &TurretAngles,
    face: &Pose2D,
) -> Result<Pose2D> {
    if !face.is_finite() {
        return Err(Error::NonFinite("marker pose"));
    }
    let fix = project_to_plane(obs, turret)?;
    let heading = normalize(turret.pan + obs.r_y + face.theta + PI);
    let ray = heading + turret.pan;
    let (s, c) = ray.sin_cos();
    Ok(Pose2D::new(face.x - fix.r * c, face.y - fix.r * s, heading))
}

/// Forward model: what the turret camera reports when the robot at `robot`
/// tracks the marker face `face` hanging `height` metres above the camera.
///
/// Returns the synthesized observation together with the (centred) turret
/// angles. The pan may fall outside the servo travel; callers that care check
/// [`TurretAngles::pan_within_limits`].
pub fn simulate_observation(
    robot: &Pose2D,
    face: &Pose2D,
    height: f64,
) -> Result<(MarkerObservation, TurretAngles)> {
    let dx = face.x - robot.x;
    let dy = face.y - robot.y;
    let r = dx.hypot(dy);
    if r == 0.0 && height == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    let bearing = dy.atan2(dx);
    let pan = normalize(bearing - robot.theta);
    let tilt = height.atan2(r);
    let yaw = normalize(robot.theta - pan - face.theta - PI);
    let obs = MarkerObservation {
        t_x: 0.0,
        t_y: 0.0,
        t_z: r.hypot(height),
        r_x: 0.0,
        r_y: yaw,
        r_z: 0.0,
    };
    Ok((obs, TurretAngles { pan, tilt }))
}

/// Static laser-to-turret-base transform: a translation of `-offset_y` along y.
pub fn laser_to_turret(offset_y: f64) -> Result<Transform3D> {
    if !offset_y.is_finite() {
        return Err(Error::NonFinite("laser offset"));
    }
    Ok(Transform3D::translation(0.0, -offset_y, 0.0))
}

/// Camera-to-turret-base rotation: pan about z composed with tilt about x.
pub fn camera_to_turret(turret: &TurretAngles) -> Result<Transform3D> {
    turret.check_finite()?;
    turret.check_tilt()?;
    let (sp, cp) = turret.pan.sin_cos();
    let (st, ct) = turret.tilt.sin_cos();
    Ok(Transform3D {
        m: [
            [cp, -sp * ct, sp * st, 0.0],
            [sp, cp * ct, -cp * st, 0.0],
            [0.0, st, ct, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
    })
}

/// Robot pose (expressed in a marker's frame) as a homogeneous transform.
pub fn robot_to_marker_transform(p: &Pose2D) -> Transform2D {
    Transform2D::from_pose(p)
}

/// Pose of a newly observed marker face relative to the robot:
/// translation `r·(cos pan, sin pan)` and orientation `-(pan + r_y + π)`.
pub fn robot_to_new_marker(obs: &MarkerObservation, turret: &TurretAngles) -> Result<Transform2D> {
    let fix = project_to_plane(obs, turret)?;
    let orientation = normalize(-(turret.pan + obs.r_y + PI));
    let (s, c) = turret.pan.sin_cos();
    Ok(Transform2D::new(orientation, fix.r * c, fix.r * s))
}

/// New marker face pose in the previous marker's frame, given the robot pose
/// relative to the previous marker and an observation of the new marker taken
/// from the same spot.
pub fn chain_marker_transform(
    pose_wrt_prev: &Pose2D,
    new_obs: Option<&MarkerObservation>,
    turret: &TurretAngles,
) -> Result<Transform2D> {
    let obs = new_obs.ok_or(Error::NoFix)?;
    if !pose_wrt_prev.is_finite() {
        return Err(Error::NonFinite("robot pose"));
    }
    let t_r1 = robot_to_new_marker(obs, turret)?;
    Ok(robot_to_marker_transform(pose_wrt_prev).compose(&t_r1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::deg;

    fn obs(t_z: f64, r_y: f64) -> MarkerObservation {
        MarkerObservation {
            t_z,
            r_y,
            ..Default::default()
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn projection_examples() {
        let f = project_to_plane(&obs(3.0, 0.0), &TurretAngles::new(0.0, deg(60.0)).unwrap()).unwrap();
        assert!(close(f.r, 1.5, 1e-12) && f.bearing == 0.0);
        let f = project_to_plane(&obs(2.0, 0.0), &TurretAngles::new(deg(45.0), 0.0).unwrap()).unwrap();
        assert!(close(f.r, 2.0, 1e-15) && close(f.bearing, deg(45.0), 1e-15));
        let f = project_to_plane(&obs(4.0, 0.0), &TurretAngles::new(deg(120.0), deg(30.0)).unwrap()).unwrap();
        assert!(close(f.r, 3.4641016151377544, 1e-12));
        assert!(close(f.bearing, deg(120.0), 1e-15));
    }

    #[test]
    fn projection_rejects_bad_input() {
        let t = TurretAngles::default();
        assert!(matches!(project_to_plane(&obs(f64::NAN, 0.0), &t), Err(Error::NonFinite(_))));
        assert!(matches!(project_to_plane(&obs(-1.0, 0.0), &t), Err(Error::MarkerBehindCamera(_))));
        let bad_tilt = TurretAngles { pan: 0.0, tilt: deg(95.0) };
        assert!(matches!(project_to_plane(&obs(1.0, 0.0), &bad_tilt), Err(Error::TurretLimit(_))));
    }

    #[test]
    fn turret_limits() {
        assert!(TurretAngles::from_degrees(170.0, 0.0).is_ok());
        assert!(TurretAngles::from_degrees(175.0, 0.0).is_err());
        assert!(TurretAngles::from_degrees(0.0, -71.0).is_err());
        let t = TurretAngles::from_degrees(0.0, 0.0).unwrap();
        assert!(close(t.pan_servo_deg(), 180.0, 1e-12));
        let back = TurretAngles::from_servo_degrees(10.0, 0.0);
        assert!(close(angle::to_deg(back.pan), -170.0, 1e-9));
    }

    #[test]
    fn square_on_marker() {
        let t = TurretAngles::default();
        let p = robot_pose_from_marker(&obs(2.0, 0.0), &t, &Pose2D::new(0.0, 0.0, 0.0)).unwrap();
        assert!(close(p.x, 2.0, 1e-12) && close(p.y, 0.0, 1e-12) && close(p.theta, PI, 1e-12));
        let p = robot_pose_from_marker(&obs(3.0, 0.0), &t, &Pose2D::new(0.0, 0.0, PI)).unwrap();
        assert!(close(p.x, -3.0, 1e-12) && close(p.y, 0.0, 1e-12) && close(p.theta, 0.0, 1e-12));
    }

    /// The printed offset formula, with its unscaled leading `-sin θm` term,
    /// taken as the robot's offset from the face. It does not survive the
    /// forward/inverse round trip; the rigid construction above does.
    #[test]
    fn printed_offset_formula_breaks_round_trip() {
        let printed = |r: f64, yaw: f64, m: f64| {
            let px = -m.sin() - r * yaw.cos() - m.sin() * r * yaw.sin();
            let py = m.sin() * r * yaw.cos() + m.cos() * r * yaw.sin();
            (px, py)
        };
        let robot = Pose2D::new(1.0, -0.5, deg(20.0));
        let face = Pose2D::new(3.5, 1.5, deg(200.0));
        let (o, t) = simulate_observation(&robot, &face, 2.0).unwrap();
        let fix = project_to_plane(&o, &t).unwrap();
        let (px, py) = printed(fix.r, o.r_y, face.theta);
        let err = (face.x + px - robot.x).hypot(face.y + py - robot.y);
        assert!(err > 0.5, "printed form unexpectedly consistent: {err}");
        let ours = robot_pose_from_marker(&o, &t, &face).unwrap();
        assert!(ours.distance_to(&robot) < 1e-9);
    }

    #[test]
    fn heading_follows_marker_orientation() {
        let t = TurretAngles::new(deg(30.0), deg(12.0)).unwrap();
        let o = obs(2.5, deg(10.0));
        let base = robot_pose_from_marker(&o, &t, &Pose2D::new(1.0, 1.0, deg(90.0))).unwrap();
        for delta in [0.3, -1.2, 2.9] {
            let p = robot_pose_from_marker(&o, &t, &Pose2D::new(1.0, 1.0, deg(90.0) + delta)).unwrap();
            assert!(angle::diff(p.theta, base.theta + delta).abs() < 1e-12);
        }
    }

    #[test]
    fn laser_translation() {
        assert_eq!(laser_to_turret(0.0).unwrap(), Transform3D::IDENTITY);
        let t = laser_to_turret(0.12).unwrap();
        assert_eq!([t.m[0][3], t.m[1][3], t.m[2][3]], [0.0, -0.12, 0.0]);
        let id = t.compose(&t.inverse());
        assert!(id.max_abs_diff(&Transform3D::IDENTITY) < 1e-12);
        assert!(laser_to_turret(f64::INFINITY).is_err());
    }

    #[test]
    fn camera_rotation() {
        let t = camera_to_turret(&TurretAngles::default()).unwrap();
        assert!(t.max_abs_diff(&Transform3D::IDENTITY) < 1e-15);
        let t = camera_to_turret(&TurretAngles::new(deg(90.0), 0.0).unwrap()).unwrap();
        assert!(t.max_abs_diff(&Transform3D::rot_z(deg(90.0))) < 1e-15);
    }

    #[test]
    fn robot_transform() {
        assert_eq!(robot_to_marker_transform(&Pose2D::default()), Transform2D::IDENTITY);
        let t = robot_to_marker_transform(&Pose2D::new(1.0, 2.0, deg(90.0)));
        assert!(close(t.angle(), deg(90.0), 1e-15));
        assert_eq!(t.apply(0.0, 0.0), (1.0, 2.0));
    }

    #[test]
    fn chain_dead_ahead() {
        let t = TurretAngles::default();
        let tr = chain_marker_transform(&Pose2D::default(), Some(&obs(4.0, 0.0)), &t).unwrap();
        let p = tr.to_pose();
        assert!(close(p.x, 4.0, 1e-12) && close(p.y, 0.0, 1e-12));
        assert!(close(p.theta.abs(), PI, 1e-12));
        assert_eq!(chain_marker_transform(&Pose2D::default(), None, &t), Err(Error::NoFix));
    }

    #[test]
    fn database_lookup() {
        let m = Marker::new(3, Pose2D::new(1.0, 0.0, 0.0), 4, 0.2).unwrap();
        let db = MarkerDatabase::new([m]).unwrap();
        assert!(db.get(3).is_ok());
        assert_eq!(db.get(4).unwrap_err(), Error::UnknownMarker(4));
        assert_eq!(
            db.locate(9, 0, &obs(1.0, 0.0), &TurretAngles::default()).unwrap_err(),
            Error::UnknownMarker(9)
        );
        assert_eq!(MarkerDatabase::new([m, m]).unwrap_err(), Error::DuplicateMarker(3));
        assert!(close(m.face_orientation(1), deg(90.0), 1e-15));
        assert!(Marker::new(1, Pose2D::default(), 3, 0.2).is_err());
    }
}
