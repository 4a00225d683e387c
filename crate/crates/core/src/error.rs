use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("marker observation behind the camera (t_z = {0})")]
    MarkerBehindCamera(f64),
    #[error("turret angle out of limits: {0}")]
    TurretLimit(String),
    #[error("unknown marker id {0}")]
    UnknownMarker(u32),
    #[error("duplicate marker id {0}")]
    DuplicateMarker(u32),
    #[error("no marker size entry for {0} cm")]
    UnknownMarkerSize(u32),
    #[error("no marker fix available")]
    NoFix,
    #[error("pose ({x:.3}, {y:.3}) is not in free space")]
    InvalidPose { x: f64, y: f64 },
    #[error("robot step would collide at ({x:.3}, {y:.3})")]
    Collision { x: f64, y: f64 },
    #[error("scan contains no finite readings")]
    UnusableScan,
    #[error("cell ({0}, {1}) is outside the grid")]
    OutOfBounds(i64, i64),
    #[error("grid has no obstacle cells")]
    NoObstacles,
    #[error("grid has no free cells")]
    NoFreeCells,
    #[error("map is not binary: found value {0}")]
    NotBinary(u8),
    #[error("candidate at cell ({0}, {1}) lies on an obstacle")]
    CandidateOnObstacle(usize, usize),
    #[error("candidate set leaves {count} free cells uncovered (first at cell {first:?})")]
    Infeasible { count: usize, first: (usize, usize) },
    #[error("skeleton point ({0}, {1}) is not covered by any marker")]
    CoverageViolation(usize, usize),
    #[error("graph is empty")]
    EmptyGraph,
    #[error("endpoint ({x:.3}, {y:.3}) is not in free space")]
    InvalidEndpoint { x: f64, y: f64 },
    #[error("no path between source and destination")]
    NoPath,
    #[error("marker database is empty")]
    EmptyDatabase,
    #[error("positions coincide")]
    CoincidentPositions,
    #[error("path is empty")]
    EmptyPlan,
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("point set needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("no timestamps could be associated")]
    NoAssociation,
    #[error("run did not finish within {0:.1} s")]
    Timeout(f64),
    #[error("localization lost: {0}")]
    LocalizationLost(String),
}
