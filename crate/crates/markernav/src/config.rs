//! Scenario files: TOML with one table per subsystem. Every key has a
//! default, so an empty file is a valid scenario on the built-in corridor.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use markernav_core::angle;
use markernav_core::geometry::{MarkerDatabase, Pose2D};
use markernav_core::mapping::{SensorModel, DEFAULT_MAP_SIZE, MAP_RESOLUTION, POSSIBLE, SCAN_CEILING};
use markernav_core::mission::{LocalizerConfig, MappingConfig, NavigationConfig, CONTROL_DT};
use markernav_core::navigation::{PurePursuitConfig, SMOOTHING_WINDOW, SWITCH_MARGIN};
use markernav_core::sim::{DetectionSpec, LaserSpec, Pid, RangeLimits, RobotLimits, World, MARKER_RANGE_TABLE};
use markernav_core::synth;

use crate::error::{CliError, Result};
use crate::pgm::MapFile;
use crate::tables::load_markers;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub run: RunSection,
    pub world: WorldSection,
    pub laser: LaserSection,
    pub detection: DetectionSection,
    pub mapping: MappingSection,
    pub navigation: NavigationSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    /// One of `corridor`, `lab`, `loop`, `straight`. Ignored when `map` is set.
    pub builtin: String,
    /// Obstacle image (PGM with sidecar), relative to the scenario file.
    pub map: Option<PathBuf>,
    /// Marker CSV. Required with `map`; replaces a built-in world's markers.
    pub markers: Option<PathBuf>,
    /// Scripted mapping route, metres. Defaults to the built-in route.
    pub route: Option<Vec<[f64; 2]>>,
    /// Marker whose pose anchors the map frame.
    pub anchor: Option<u32>,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self {
            builtin: "corridor".into(),
            map: None,
            markers: None,
            route: None,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaserSection {
    pub fov_deg: f64,
    pub max_range: f64,
    pub beams: usize,
    pub range_sigma: f64,
    pub nan_rate: f64,
    pub inf_rate: f64,
    /// Lateral offset of the scanner from the robot centre, metres.
    pub offset: f64,
}

impl Default for LaserSection {
    fn default() -> Self {
        let d = LaserSpec::default();
        Self {
            fov_deg: 240.0,
            max_range: d.max_range,
            beams: d.beam_count,
            range_sigma: d.range_sigma,
            nan_rate: d.nan_rate,
            inf_rate: d.inf_rate,
            offset: 0.0,
        }
    }
}

impl LaserSection {
    pub fn spec(&self) -> LaserSpec {
        LaserSpec {
            fov: angle::deg(self.fov_deg),
            max_range: self.max_range,
            beam_count: self.beams,
            range_sigma: self.range_sigma,
            nan_rate: self.nan_rate,
            inf_rate: self.inf_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeRow {
    pub size_cm: u32,
    pub tracking_m: f64,
    pub cutoff_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub camera_fov_deg: f64,
    pub face_half_angle_deg: f64,
    pub persistence: f64,
    pub marker_height: f64,
    pub range_sigma: f64,
    pub yaw_sigma: f64,
    pub ranges: Vec<RangeRow>,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionSpec::default();
        Self {
            camera_fov_deg: 78.0,
            face_half_angle_deg: 80.0,
            persistence: d.persistence,
            marker_height: d.marker_height,
            range_sigma: d.range_sigma,
            yaw_sigma: d.yaw_sigma,
            ranges: MARKER_RANGE_TABLE
                .iter()
                .map(|r| RangeRow {
                    size_cm: r.size_cm,
                    tracking_m: r.tracking,
                    cutoff_m: r.cutoff,
                })
                .collect(),
        }
    }
}

impl DetectionSection {
    pub fn spec(&self) -> markernav_core::Result<DetectionSpec> {
        let spec = DetectionSpec {
            ranges: self
                .ranges
                .iter()
                .map(|r| RangeLimits {
                    size_cm: r.size_cm,
                    tracking: r.tracking_m,
                    cutoff: r.cutoff_m,
                })
                .collect(),
            camera_fov: angle::deg(self.camera_fov_deg),
            face_half_angle: angle::deg(self.face_half_angle_deg),
            persistence: self.persistence,
            marker_height: self.marker_height,
            range_sigma: self.range_sigma,
            yaw_sigma: self.yaw_sigma,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingSection {
    pub grid_width: usize,
    pub grid_height: usize,
    /// Cells per metre.
    pub resolution: f64,
    pub speed: f64,
    pub turn_rate: f64,
    pub scan_every: usize,
    pub ceiling: f64,
    pub threshold: i8,
    pub p_occupied: f64,
    pub p_possible: f64,
    pub p_free: f64,
    /// Smoothing window applied to fixes while mapping.
    pub window: usize,
    pub horizon: f64,
}

impl Default for MappingSection {
    fn default() -> Self {
        let m = MappingConfig::default();
        Self {
            grid_width: DEFAULT_MAP_SIZE,
            grid_height: DEFAULT_MAP_SIZE,
            resolution: MAP_RESOLUTION,
            speed: m.speed,
            turn_rate: m.turn_rate,
            scan_every: m.scan_every,
            ceiling: SCAN_CEILING,
            threshold: POSSIBLE,
            p_occupied: m.sensor.occupied,
            p_possible: m.sensor.possible,
            p_free: m.sensor.free,
            window: m.localizer.window,
            horizon: m.localizer.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavigationSection {
    /// `[x, y, theta_deg]`; defaults to the first route vertex facing the second.
    pub start: Option<[f64; 3]>,
    /// `[x, y]` or `[x, y, theta_deg]`. A waypoint without a heading faces
    /// the next one. Defaults to the route after its first vertex.
    pub waypoints: Option<Vec<Vec<f64>>>,
    pub lookahead: f64,
    pub max_linear: f64,
    pub max_angular: f64,
    pub goal_tolerance: f64,
    pub turret_kp: f64,
    pub window: usize,
    pub switch_margin: f64,
    pub horizon: f64,
    pub turn_gain: f64,
    pub max_turn_rate: f64,
    pub heading_tolerance: f64,
    pub max_time: f64,
    pub robot_max_linear: f64,
    pub robot_max_angular: f64,
}

impl Default for NavigationSection {
    fn default() -> Self {
        let n = NavigationConfig::default();
        Self {
            start: None,
            waypoints: None,
            lookahead: n.pursuit.lookahead,
            max_linear: n.pursuit.max_linear,
            max_angular: n.pursuit.max_angular,
            goal_tolerance: n.pursuit.goal_tolerance,
            turret_kp: n.localizer.turret_pid.kp,
            window: SMOOTHING_WINDOW,
            switch_margin: SWITCH_MARGIN,
            horizon: n.localizer.horizon,
            turn_gain: n.turn_gain,
            max_turn_rate: n.max_turn_rate,
            heading_tolerance: n.heading_tolerance,
            max_time: n.max_time,
            robot_max_linear: n.limits.max_linear,
            robot_max_angular: n.limits.max_angular,
        }
    }
}

impl NavigationSection {
    pub fn config(&self) -> NavigationConfig {
        NavigationConfig {
            dt: CONTROL_DT,
            localizer: LocalizerConfig {
                window: self.window,
                switch_margin: self.switch_margin,
                horizon: self.horizon,
                turret_pid: Pid::new(self.turret_kp, 0.0, 0.0),
            },
            pursuit: PurePursuitConfig {
                lookahead: self.lookahead,
                max_linear: self.max_linear,
                max_angular: self.max_angular,
                goal_tolerance: self.goal_tolerance,
            },
            limits: RobotLimits {
                max_linear: self.robot_max_linear,
                max_angular: self.robot_max_angular,
            },
            turn_gain: self.turn_gain,
            max_turn_rate: self.max_turn_rate,
            heading_tolerance: self.heading_tolerance,
            max_time: self.max_time,
        }
    }
}

/// A world with its scripted route, resolved from a scenario.
#[derive(Debug, Clone)]
pub struct ResolvedWorld {
    pub world: World,
    pub route: Vec<(f64, f64)>,
    pub anchor: u32,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())
    }

    /// Canonical TOML of the effective parameters, embedded in outputs.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn resolve_world(&self, base: &Path) -> Result<ResolvedWorld> {
        let w = &self.world;
        let (world, default_route, default_anchor) = match &w.map {
            Some(map) => {
                let map_path = base.join(map);
                let markers = w.markers.as_ref().ok_or_else(|| CliError::Config {
                    path: map_path.clone(),
                    message: "world.markers is required with world.map".into(),
                })?;
                let file = MapFile::load(&map_path)?;
                let db: MarkerDatabase = load_markers(&base.join(markers))?;
                let anchor = db.iter().next().map(|m| m.id).unwrap_or(0);
                (World::new(file.obstacles(), file.sidecar.geometry, db)?, Vec::new(), anchor)
            }
            None => {
                let scene = match w.builtin.as_str() {
                    "corridor" => synth::corridor_scene(),
                    "lab" => synth::lab_scene(),
                    "loop" => synth::loop_scene(),
                    "straight" => synth::straight_scene(),
                    other => {
                        return Err(CliError::Usage(format!(
                            "unknown built-in world {other:?} (expected corridor, lab, loop or straight)"
                        )))
                    }
                }?;
                let world = match &w.markers {
                    Some(m) => World::new(scene.world.obstacles, scene.world.geometry, load_markers(&base.join(m))?)?,
                    None => scene.world,
                };
                (world, scene.route, scene.anchor)
            }
        };
        let route = match &w.route {
            Some(r) => r.iter().map(|p| (p[0], p[1])).collect(),
            None => default_route,
        };
        if route.is_empty() {
            return Err(CliError::Usage("world.route is required for a world loaded from file".into()));
        }
        Ok(ResolvedWorld {
            world,
            route,
            anchor: w.anchor.unwrap_or(default_anchor),
        })
    }

    pub fn mapping_config(&self) -> markernav_core::Result<MappingConfig> {
        let m = &self.mapping;
        let sensor = SensorModel {
            occupied: m.p_occupied,
            possible: m.p_possible,
            free: m.p_free,
        };
        sensor.validate()?;
        Ok(MappingConfig {
            dt: CONTROL_DT,
            speed: m.speed,
            turn_rate: m.turn_rate,
            scan_every: m.scan_every,
            laser: self.laser.spec(),
            laser_offset: self.laser.offset,
            detection: self.detection.spec()?,
            sensor,
            localizer: LocalizerConfig {
                window: m.window,
                horizon: m.horizon,
                ..LocalizerConfig::default()
            },
            ceiling: m.ceiling,
        })
    }

    /// Start pose and waypoints for a navigation run over `route`.
    pub fn navigation_plan(&self, route: &[(f64, f64)]) -> Result<(Pose2D, Vec<Pose2D>)> {
        let n = &self.navigation;
        let points: Vec<Vec<f64>> = match &n.waypoints {
            Some(w) => w.clone(),
            None => route.iter().skip(1).map(|&(x, y)| vec![x, y]).collect(),
        };
        if points.is_empty() {
            return Err(CliError::Usage("navigation needs at least one waypoint".into()));
        }
        if let Some(bad) = points.iter().find(|p| !(p.len() == 2 || p.len() == 3)) {
            return Err(CliError::Usage(format!("waypoint {bad:?} must have 2 or 3 numbers")));
        }
        let start = match n.start {
            Some([x, y, th]) => Pose2D::new(x, y, angle::deg(th)),
            None => {
                let &(x, y) = route.first().ok_or_else(|| CliError::Usage("navigation.start is required".into()))?;
                Pose2D::new(x, y, (points[0][1] - y).atan2(points[0][0] - x))
            }
        };
        let mut out = Vec::with_capacity(points.len());
        let mut prev = (start.x, start.y);
        for (i, p) in points.iter().enumerate() {
            let heading = match (p.get(2), points.get(i + 1)) {
                (Some(&deg), _) => angle::deg(deg),
                (None, Some(next)) => (next[1] - p[1]).atan2(next[0] - p[0]),
                (None, None) => (p[1] - prev.1).atan2(p[0] - prev.0),
            };
            out.push(Pose2D::new(p[0], p[1], heading));
            prev = (p[0], p[1]);
        }
        Ok((start, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let s = Scenario::parse("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.mapping.resolution, 20.0);
        assert_eq!(s.laser.max_range, 3.5);
        assert_eq!(s.laser.fov_deg, 240.0);
        assert_eq!(s.navigation.lookahead, 1.0);
        assert_eq!(s.navigation.turret_kp, 0.7);
        assert_eq!(s.navigation.switch_margin, 0.2);
        assert_eq!(s.detection.ranges.len(), 4);
        let laser = s.laser.spec();
        let d = LaserSpec::default();
        assert!((laser.fov - d.fov).abs() < 1e-12 && laser.beam_count == d.beam_count);
        let det = s.detection.spec().unwrap();
        let dd = DetectionSpec::default();
        assert!((det.camera_fov - dd.camera_fov).abs() < 1e-12);
        assert!((det.face_half_angle - dd.face_half_angle).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Scenario::parse("[laser]\nfov = 3").is_err());
        assert!(Scenario::parse("[nope]").is_err());
    }

    #[test]
    fn canonical_form_parses_back() {
        let s = Scenario::parse("[run]\nseed = 4\n[world]\nbuiltin = \"lab\"\n[navigation]\nwaypoints = [[1.0, 2.0], [3.0, 2.0, 90.0]]\n").unwrap();
        assert_eq!(Scenario::parse(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn waypoint_headings_default_to_the_next_leg() {
        let s = Scenario::parse("[navigation]\nwaypoints = [[1.0, 0.0], [1.0, 1.0]]").unwrap();
        let (start, wps) = s.navigation_plan(&[(0.0, 0.0)]).unwrap();
        assert_eq!(start.theta, 0.0);
        assert!((wps[0].theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((wps[1].theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
