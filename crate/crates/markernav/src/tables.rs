//! CSV files: marker lists, trajectory logs, paths, curves and reports.
//! Every file starts with `#` comment lines carrying the seed and
//! parameters that produced it.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use markernav_core::angle;
use markernav_core::geometry::{Marker, MarkerDatabase, Pose2D};
use markernav_core::mission::Sample;

use crate::error::{CliError, Result};
use crate::pgm::{read_file, write_file, Provenance};

pub fn encode<T: Serialize>(rows: &[T], prov: &Provenance) -> Result<Vec<u8>> {
    let mut out = prov.comment_lines().into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Usage(format!("csv encoding failed: {e}")))?;
    }
    w.flush().map_err(|e| CliError::Usage(format!("csv encoding failed: {e}")))?;
    drop(w);
    Ok(out)
}

pub fn save<T: Serialize>(path: &Path, rows: &[T], prov: &Provenance) -> Result<()> {
    write_file(path, &encode(rows, prov)?)
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<Vec<T>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes)
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::format(path, format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    decode(&read_file(path)?, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerRow {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub theta_deg: f64,
    pub size_cm: u32,
    pub faces: u8,
}

impl From<&Marker> for MarkerRow {
    fn from(m: &Marker) -> Self {
        Self {
            id: m.id,
            x_m: m.pose.x,
            y_m: m.pose.y,
            theta_deg: angle::to_deg(m.pose.theta),
            size_cm: m.size_cm(),
            faces: m.faces,
        }
    }
}

impl MarkerRow {
    pub fn to_marker(&self) -> markernav_core::Result<Marker> {
        Marker::new(
            self.id,
            Pose2D::new(self.x_m, self.y_m, angle::normalize(angle::deg(self.theta_deg))),
            self.faces,
            f64::from(self.size_cm) / 100.0,
        )
    }
}

pub fn marker_rows(db: &MarkerDatabase) -> Vec<MarkerRow> {
    db.iter().map(MarkerRow::from).collect()
}

pub fn load_markers(path: &Path) -> Result<MarkerDatabase> {
    let rows: Vec<MarkerRow> = load(path)?;
    let markers = rows
        .iter()
        .map(MarkerRow::to_marker)
        .collect::<markernav_core::Result<Vec<_>>>()
        .map_err(|e| CliError::format(path, e.to_string()))?;
    MarkerDatabase::new(markers).map_err(|e| CliError::format(path, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseFlag {
    Raw,
    Smoothed,
    DeadReckoned,
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
    pub flag: PoseFlag,
    pub tracked_marker_id: u32,
    pub v: f64,
    pub w: f64,
}

/// Estimated trajectory: the raw fix where one exists (`raw_fixes`) or the
/// smoothed estimate, dead-reckoned between fixes.
pub fn estimate_rows(samples: &[Sample], raw_fixes: bool) -> Vec<TrajectoryRow> {
    samples
        .iter()
        .map(|s| {
            let (pose, flag) = match (s.raw_pose, raw_fixes) {
                (Some(p), true) => (p, PoseFlag::Raw),
                (Some(_), false) => (s.estimate, PoseFlag::Smoothed),
                (None, _) => (s.estimate, PoseFlag::DeadReckoned),
            };
            TrajectoryRow {
                t_s: s.t,
                x_m: pose.x,
                y_m: pose.y,
                theta_rad: pose.theta,
                flag,
                tracked_marker_id: s.tracked,
                v: s.v,
                w: s.w,
            }
        })
        .collect()
}

pub fn truth_rows(samples: &[Sample]) -> Vec<TrajectoryRow> {
    samples
        .iter()
        .map(|s| TrajectoryRow {
            t_s: s.t,
            x_m: s.truth.x,
            y_m: s.truth.y,
            theta_rad: s.truth.theta,
            flag: PoseFlag::Truth,
            tracked_marker_id: s.tracked,
            v: s.v,
            w: s.w,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub index: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub theta_deg: f64,
    /// Marker responsible for this waypoint, when markers were supplied.
    pub marker_id: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub range_m: f64,
    pub candidates: usize,
    pub markers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub environment: String,
    pub method: String,
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_round_trip_through_csv() {
        let db = MarkerDatabase::new([
            Marker::new(0, Pose2D::new(1.0, 2.5, 0.0), 4, 0.2).unwrap(),
            Marker::new(3, Pose2D::new(-4.25, 0.1, angle::deg(90.0)), 2, 0.3).unwrap(),
        ])
        .unwrap();
        let bytes = encode(&marker_rows(&db), &Provenance::new(5, "range = 4.25")).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# seed 5\n# range = 4.25\nid,x_m,y_m,theta_deg,size_cm,faces\n"));
        let back: Vec<MarkerRow> = decode(&bytes, Path::new("m.csv")).unwrap();
        for (row, m) in back.iter().zip(db.iter()) {
            let r = row.to_marker().unwrap();
            assert_eq!((r.id, r.faces, r.size_cm()), (m.id, m.faces, m.size_cm()));
            assert!(r.pose.distance_to(&m.pose) < 1e-12);
            assert!(angle::diff(r.pose.theta, m.pose.theta).abs() < 1e-12);
        }
    }

    #[test]
    fn flags_serialize_in_snake_case() {
        let row = TrajectoryRow {
            t_s: 0.0,
            x_m: 0.0,
            y_m: 0.0,
            theta_rad: 0.0,
            flag: PoseFlag::DeadReckoned,
            tracked_marker_id: 1,
            v: 0.0,
            w: 0.0,
        };
        let text = String::from_utf8(encode(&[row], &Provenance::default()).unwrap()).unwrap();
        assert!(text.contains(",dead_reckoned,1,"));
    }

    #[test]
    fn bad_rows_name_the_file() {
        let err = decode::<MarkerRow>(b"id,x_m\nzz,1\n", Path::new("bad.csv")).unwrap_err();
        assert!(err.to_string().contains("bad.csv"));
    }
}
