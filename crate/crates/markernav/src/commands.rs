//! Subcommand implementations. Each writes its files into an output
//! directory and returns a short summary for stdout; wall-clock times go to
//! stdout only so the files stay reproducible.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use markernav_core::angle;
use markernav_core::eval::{self, Stamped};
use markernav_core::geometry::{MarkerDatabase, Pose2D};
use markernav_core::mapping::{binarize_and_thin, OccupancyGrid};
use markernav_core::mission::{run_mapping, run_route, Sample};
use markernav_core::placement::{
    associate_path_points, coverage_raytrace, coverage_report, place_markers, CornerRule, ReducedPlacement,
};
use markernav_core::planner::{build_roadmap, plan_path};
use markernav_core::raster::{BitGrid, Grid, GridGeometry};
use markernav_core::sim::{seeded_rng, DetectionSpec};

use crate::config::Scenario;
use crate::error::{CliError, Result};
use crate::pgm::{self, MapFile, Provenance, Sidecar, PATH_GREY};
use crate::tables::{self, CurveRow, MarkerRow, PathRow, ReportRow, TrajectoryRow};

/// Effective scenario and where to put its outputs.
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub base: PathBuf,
    pub out: PathBuf,
}

impl ScenarioRun {
    pub fn load(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        let mut scenario = Scenario::load(path)?;
        if let Some(s) = seed {
            scenario.run.seed = s;
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = out
            .or_else(|| scenario.run.output.as_ref().map(|o| base.join(o)))
            .ok_or_else(|| CliError::Usage("no output directory: pass --out or set run.output".into()))?;
        Ok(Self { scenario, base, out })
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(self.scenario.run.seed, self.scenario.to_toml())
    }
}

fn elapsed(start: Instant) -> String {
    format!("runtime_s {:.3}", start.elapsed().as_secs_f64())
}

pub fn cmd_map(run: &ScenarioRun) -> Result<String> {
    let start = Instant::now();
    let s = &run.scenario;
    let resolved = s.resolve_world(&run.base)?;
    let cfg = s.mapping_config()?;
    let grid = OccupancyGrid::new(s.mapping.grid_width, s.mapping.grid_height, s.mapping.resolution)?;
    let mut rng = seeded_rng(s.run.seed);
    let result = run_mapping(&resolved.world, &resolved.route, resolved.anchor, grid, &cfg, &mut rng)?;

    let prov = run.provenance();
    let out = &run.out;
    let map = MapFile {
        values: result.grid.values(),
        sidecar: Sidecar {
            geometry: result.grid.geometry,
            threshold: s.mapping.threshold,
        },
    };
    map.save(&out.join("map.pgm"), &prov)?;
    pgm::write_file(&out.join("counts.pgm"), &pgm::encode_counts(result.grid.counts(), &prov))?;
    MapFile::from_obstacles(&resolved.world.obstacles, resolved.world.geometry).save(&out.join("truth.pgm"), &prov)?;
    tables::save(&out.join("trajectory.csv"), &tables::estimate_rows(&result.samples, true), &prov)?;
    tables::save(&out.join("truth.csv"), &tables::truth_rows(&result.samples), &prov)?;
    tables::save(&out.join("markers.csv"), &tables::marker_rows(&result.markers), &prov)?;

    Ok(format!(
        "map: {} frames, {} scans fused, {} markers registered, {}",
        result.samples.len(),
        result.scans_fused,
        result.markers.len(),
        elapsed(start)
    ))
}

/// Marker range for `place` and `plan`: explicit metres, or the tracking
/// distance of a marker size.
pub fn marker_range(range: Option<f64>, size_cm: Option<u32>) -> Result<f64> {
    match (range, size_cm) {
        (Some(r), None) if r > 0.0 && r.is_finite() => Ok(r),
        (Some(r), None) => Err(CliError::Usage(format!("range must be positive, got {r}"))),
        (None, Some(s)) => DetectionSpec::default()
            .limits(s)
            .map(|l| l.tracking)
            .ok_or_else(|| CliError::Usage(format!("no range data for {s} cm markers (known: 10, 20, 30, 40)"))),
        (None, None) => Ok(DetectionSpec::default().limits(20).map(|l| l.tracking).unwrap_or(4.25)),
        (Some(_), Some(_)) => Err(CliError::Usage("pass either --range or --size, not both".into())),
    }
}

pub struct PlaceArgs {
    pub map: PathBuf,
    pub range: Option<f64>,
    pub size_cm: Option<u32>,
    pub curve: Vec<f64>,
    pub corner_rule: CornerRule,
    pub thin: bool,
    pub out: PathBuf,
    pub seed: u64,
}

fn placement_masks(file: &MapFile, thin: bool) -> (BitGrid, BitGrid) {
    let obstacles = if thin {
        binarize_and_thin(&file.values, file.sidecar.threshold)
    } else {
        file.obstacles()
    };
    (obstacles, file.known())
}

pub fn cmd_place(a: &PlaceArgs) -> Result<String> {
    let start = Instant::now();
    let file = MapFile::load(&a.map)?;
    let range_m = marker_range(a.range, a.size_cm)?;
    let size_cm = a.size_cm.unwrap_or(20);
    let geometry = file.sidecar.geometry;
    let (obstacles, traversable) = placement_masks(&file, a.thin);
    let params = format!(
        "map = {:?}\nrange_m = {range_m}\nsize_cm = {size_cm}\ncurve = {:?}\ncorner_rule = {:?}\nthin = {}",
        a.map.display().to_string(),
        a.curve,
        a.corner_rule,
        a.thin
    );
    let prov = Provenance::new(a.seed, params);

    let placed = place_markers(&obstacles, &traversable, range_m * geometry.resolution, a.corner_rule)?;
    let rows: Vec<MarkerRow> = placed
        .markers
        .iter()
        .enumerate()
        .map(|(id, &(cx, cy))| {
            let (x, y) = geometry.cell_center(cx as f64, cy as f64);
            MarkerRow {
                id: id as u32,
                x_m: x,
                y_m: y,
                theta_deg: 0.0,
                size_cm,
                faces: 4,
            }
        })
        .collect();
    tables::save(&a.out.join("markers.csv"), &rows, &prov)?;
    pgm::write_file(&a.out.join("coverage.txt"), coverage_text(&placed, &obstacles, &traversable, &prov).as_bytes())?;

    let mut curve = Vec::with_capacity(a.curve.len());
    for &r in &a.curve {
        if !(r > 0.0) || !r.is_finite() {
            return Err(CliError::Usage(format!("curve ranges must be positive, got {r}")));
        }
        let p = place_markers(&obstacles, &traversable, r * geometry.resolution, a.corner_rule)?;
        curve.push(CurveRow {
            range_m: r,
            candidates: p.candidates,
            markers: p.markers.len(),
        });
    }
    if !curve.is_empty() {
        tables::save(&a.out.join("curve.csv"), &curve, &prov)?;
    }
    Ok(format!(
        "place: {} markers from {} candidates at {range_m} m, {} free cells, {}",
        placed.markers.len(),
        placed.candidates,
        placed.free_cells,
        elapsed(start)
    ))
}

fn coverage_text(placed: &ReducedPlacement, obstacles: &BitGrid, traversable: &BitGrid, prov: &Provenance) -> String {
    let free = Grid::from_fn(obstacles.width(), obstacles.height(), |x, y| *traversable.get(x, y) && !*obstacles.get(x, y));
    let report = coverage_report(&free, &placed.masks);
    let mut s = prov.comment_lines();
    let _ = writeln!(s, "free_cells {}", report.free_cells);
    let _ = writeln!(s, "covered_cells {}", report.covered_cells);
    let _ = writeln!(s, "markers {}", placed.markers.len());
    let _ = writeln!(s, "candidates {}", placed.candidates);
    s.push_str("\nmarker covered_cells\n");
    for (id, n) in report.per_marker.iter().enumerate() {
        let _ = writeln!(s, "{id} {n}");
    }
    s.push_str("\nseen_by cells\n");
    for (k, n) in report.histogram.iter().enumerate() {
        let _ = writeln!(s, "{k} {n}");
    }
    s
}

pub struct PlanArgs {
    pub map: PathBuf,
    pub from: Pose2D,
    pub to: Pose2D,
    pub markers: Option<PathBuf>,
    pub range: f64,
    pub out: PathBuf,
    pub seed: u64,
}

pub fn cmd_plan(a: &PlanArgs) -> Result<String> {
    let start = Instant::now();
    let file = MapFile::load(&a.map)?;
    let geometry = file.sidecar.geometry;
    let free = file.free();
    let (_, skeleton, graph) = build_roadmap(&free)?;
    let plan = plan_path(&graph, &free, &geometry, &a.from, &a.to)?;
    let prov = Provenance::new(
        a.seed,
        format!(
            "map = {:?}\nfrom = [{}, {}, {}]\nto = [{}, {}, {}]\nmarkers = {:?}\nrange_m = {}",
            a.map.display().to_string(),
            a.from.x,
            a.from.y,
            angle::to_deg(a.from.theta),
            a.to.x,
            a.to.y,
            angle::to_deg(a.to.theta),
            a.markers.as_ref().map(|p| p.display().to_string()),
            a.range
        ),
    );

    let assigned = match &a.markers {
        Some(path) => Some(associate_waypoints(&tables::load_markers(path)?, &plan.waypoints, &free, &geometry, a.range)?),
        None => None,
    };
    let rows: Vec<PathRow> = plan
        .waypoints
        .iter()
        .enumerate()
        .map(|(i, w)| PathRow {
            index: i,
            x_m: w.x,
            y_m: w.y,
            theta_deg: angle::to_deg(w.theta),
            marker_id: assigned.as_ref().map(|ids| ids[i]),
        })
        .collect();
    tables::save(&a.out.join("path.csv"), &rows, &prov)?;

    #[derive(serde::Serialize)]
    struct CellRow {
        x: usize,
        y: usize,
    }
    let cells: Vec<CellRow> = plan.cells.iter().map(|&(x, y)| CellRow { x, y }).collect();
    tables::save(&a.out.join("path_cells.csv"), &cells, &prov)?;
    let skel: Vec<CellRow> = (0..skeleton.len())
        .filter(|&i| skeleton.data()[i])
        .map(|i| {
            let (x, y) = skeleton.coords(i);
            CellRow { x, y }
        })
        .collect();
    tables::save(&a.out.join("skeleton.csv"), &skel, &prov)?;

    let mut overlay = file.values.map(|&v| pgm::grey_of(v));
    for &(x, y) in &plan.cells {
        overlay.set(x, y, PATH_GREY);
    }
    pgm::write_file(&a.out.join("overlay.pgm"), &pgm::encode_grey(&overlay, &prov))?;
    Ok(format!(
        "plan: {} waypoints, {:.3} m, {}",
        plan.waypoints.len(),
        plan.length,
        elapsed(start)
    ))
}

/// Marker id responsible for each waypoint: the nearest marker that can see
/// the waypoint's cell within `range_m`.
fn associate_waypoints(
    db: &MarkerDatabase,
    waypoints: &[Pose2D],
    free: &BitGrid,
    geometry: &GridGeometry,
    range_m: f64,
) -> Result<Vec<u32>> {
    let to_cell = |x: f64, y: f64| -> markernav_core::Result<(usize, usize)> {
        let (cx, cy) = geometry.to_cell(x, y);
        if free.in_bounds(cx, cy) {
            Ok((cx as usize, cy as usize))
        } else {
            Err(markernav_core::Error::OutOfBounds(cx, cy))
        }
    };
    let ids: Vec<u32> = db.iter().map(|m| m.id).collect();
    let cells = db.iter().map(|m| to_cell(m.pose.x, m.pose.y)).collect::<markernav_core::Result<Vec<_>>>()?;
    let masks = cells
        .iter()
        .map(|&c| coverage_raytrace(free, c, range_m * geometry.resolution))
        .collect::<markernav_core::Result<Vec<_>>>()?;
    let points = waypoints.iter().map(|w| to_cell(w.x, w.y)).collect::<markernav_core::Result<Vec<_>>>()?;
    let idx = associate_path_points(&points, &cells, &masks, free.width())?;
    Ok(idx.iter().map(|&i| ids[i as usize]).collect())
}

pub struct NavigateArgs {
    pub path: Option<PathBuf>,
    pub markers: Option<PathBuf>,
}

pub fn cmd_navigate(run: &ScenarioRun, a: &NavigateArgs) -> Result<String> {
    let start = Instant::now();
    let s = &run.scenario;
    let resolved = s.resolve_world(&run.base)?;
    let (start_pose, waypoints) = match &a.path {
        Some(p) => {
            let rows: Vec<PathRow> = tables::load(p)?;
            let (first, rest) = rows.split_first().ok_or_else(|| CliError::format(p, "path has no waypoints"))?;
            let pose = |r: &PathRow| Pose2D::new(r.x_m, r.y_m, angle::deg(r.theta_deg));
            let start = match s.navigation.start {
                Some([x, y, th]) => Pose2D::new(x, y, angle::deg(th)),
                None => pose(first),
            };
            let wps: Vec<Pose2D> = if s.navigation.start.is_some() { rows.iter().map(pose).collect() } else { rest.iter().map(pose).collect() };
            (start, wps)
        }
        None => s.navigation_plan(&resolved.route)?,
    };
    if waypoints.is_empty() {
        return Err(CliError::Usage("navigation needs at least one waypoint".into()));
    }
    let db = match &a.markers {
        Some(p) => tables::load_markers(p)?,
        None => resolved.world.markers.clone(),
    };
    let cfg = s.navigation.config();
    let spec = s.detection.spec()?;
    let mut rng = seeded_rng(s.run.seed);
    let result = run_route(&resolved.world, db, start_pose, &waypoints, &cfg, &spec, &mut rng)?;

    let prov = run.provenance();
    let out = &run.out;
    tables::save(&out.join("trajectory.csv"), &tables::estimate_rows(&result.samples, false), &prov)?;
    tables::save(&out.join("truth.csv"), &tables::truth_rows(&result.samples), &prov)?;

    let last = result.samples.last().map(|x| x.truth).unwrap_or(start_pose);
    let goal = waypoints[waypoints.len() - 1];
    let fixes = result.samples.iter().filter(|x| x.raw).count();
    let (est, truth) = stamped(&result.samples);
    let ate = eval::ate(&est, &truth, 1e-6, false)?;
    let duration = result.samples.last().map(|x| x.t).unwrap_or(0.0);
    let rows = vec![
        row("max_cross_track_m", "simulation", "navigate", result.max_cross_track()),
        row("final_position_error_m", "simulation", "navigate", (last.x - goal.x).hypot(last.y - goal.y)),
        row("final_heading_error_deg", "simulation", "navigate", angle::to_deg(angle::diff(last.theta, goal.theta)).abs()),
        row("ate_m", "simulation", "navigate", ate.rmse),
        row("fix_fraction", "simulation", "navigate", fixes as f64 / result.samples.len().max(1) as f64),
        row("duration_s", "simulation", "navigate", duration),
    ];
    write_report(out, &rows, &prov)?;
    Ok(format!(
        "navigate: {} legs, max cross-track {:.4} m, {}",
        waypoints.len(),
        result.max_cross_track(),
        elapsed(start)
    ))
}

fn stamped(samples: &[Sample]) -> (Vec<Stamped>, Vec<Stamped>) {
    samples
        .iter()
        .map(|x| {
            (
                Stamped {
                    t: x.t,
                    x: x.estimate.x,
                    y: x.estimate.y,
                },
                Stamped {
                    t: x.t,
                    x: x.truth.x,
                    y: x.truth.y,
                },
            )
        })
        .unzip()
}

fn row(metric: &str, environment: &str, method: &str, value: f64) -> ReportRow {
    ReportRow {
        metric: metric.into(),
        environment: environment.into(),
        method: method.into(),
        value,
    }
}

/// Plain-text table of report rows.
pub fn report_table(rows: &[ReportRow]) -> String {
    let header = ["metric", "environment", "method", "value"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| [r.metric.clone(), r.environment.clone(), r.method.clone(), format!("{:.6}", r.value)])
        .collect();
    let mut width = header.map(str::len);
    for c in &cells {
        for (w, s) in width.iter_mut().zip(c) {
            *w = (*w).max(s.len());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, c: [&str; 4]| {
        let _ = writeln!(s, "{:<a$}  {:<b$}  {:<c$}  {:>d$}", c[0], c[1], c[2], c[3], a = width[0], b = width[1], c = width[2], d = width[3]);
    };
    line(&mut s, header);
    for c in &cells {
        line(&mut s, [&c[0], &c[1], &c[2], &c[3]]);
    }
    s
}

fn write_report(out: &Path, rows: &[ReportRow], prov: &Provenance) -> Result<()> {
    let text = format!("{}{}", prov.comment_lines(), report_table(rows));
    pgm::write_file(&out.join("report.txt"), text.as_bytes())?;
    tables::save(&out.join("report.csv"), rows, prov)
}

pub struct EvalArgs {
    pub map: PathBuf,
    pub truth: PathBuf,
    pub trajectory: Option<PathBuf>,
    pub truth_trajectory: Option<PathBuf>,
    pub environment: String,
    pub method: String,
    pub symmetric: bool,
    pub max_gap: f64,
    pub out: PathBuf,
    pub seed: u64,
}

/// Obstacle points of a map in the cell units of `target`.
fn points_in(file: &MapFile, target: &GridGeometry) -> Result<Vec<eval::Point>> {
    let pts = eval::extract_obstacle_points(&file.values, file.sidecar.threshold)?;
    let g = &file.sidecar.geometry;
    Ok(pts
        .iter()
        .map(|&(cx, cy)| {
            let (x, y) = g.cell_center(cx, cy);
            target.to_cell_f(x, y)
        })
        .collect())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let start = Instant::now();
    let map = MapFile::load(&a.map)?;
    let truth = MapFile::load(&a.truth)?;
    let target = truth.sidecar.geometry;
    let evaluated = points_in(&map, &target)?;
    let reference = points_in(&truth, &target)?;
    let cmp = eval::compare_maps(&evaluated, &reference, a.symmetric)?;
    let cm_per_cell = 100.0 / target.resolution;
    let (env, method) = (a.environment.as_str(), a.method.as_str());
    let (tx, ty) = cmp.icp.transform.translation();
    let mut rows = vec![
        row("adnn_cells", env, method, cmp.adnn_cells),
        row("adnn_cm", env, method, cmp.adnn_cells * cm_per_cell),
        row("rmse_cells", env, method, cmp.rmse_cells),
        row("rmse_cm", env, method, cmp.rmse_cells * cm_per_cell),
        row("icp_rotation_deg", env, method, angle::to_deg(cmp.icp.transform.angle()).abs()),
        row("icp_translation_cells", env, method, tx.hypot(ty)),
    ];
    match (&a.trajectory, &a.truth_trajectory) {
        (Some(e), Some(t)) => {
            let load = |p: &Path| -> Result<Vec<Stamped>> {
                let r: Vec<TrajectoryRow> = tables::load(p)?;
                Ok(r.iter().map(|r| Stamped { t: r.t_s, x: r.x_m, y: r.y_m }).collect())
            };
            let (est, gt) = (load(e)?, load(t)?);
            rows.push(row("ate_m", env, method, eval::ate(&est, &gt, a.max_gap, false)?.rmse));
            rows.push(row("ate_aligned_m", env, method, eval::ate(&est, &gt, a.max_gap, true)?.rmse));
        }
        (None, None) => {}
        _ => return Err(CliError::Usage("--trajectory and --truth-trajectory go together".into())),
    }
    let prov = Provenance::new(
        a.seed,
        format!(
            "map = {:?}\ntruth = {:?}\nsymmetric = {}\nmax_gap_s = {}",
            a.map.display().to_string(),
            a.truth.display().to_string(),
            a.symmetric,
            a.max_gap
        ),
    );
    write_report(&a.out, &rows, &prov)?;
    Ok(format!("{}{}", report_table(&rows), elapsed(start)))
}

pub fn range_table_csv() -> Result<Vec<u8>> {
    let rows: Vec<crate::config::RangeRow> = crate::config::DetectionSection::default().ranges;
    tables::encode(&rows, &Provenance::new(0, "source = built-in range table"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_defaults_to_the_20cm_tracking_distance() {
        assert_eq!(marker_range(None, None).unwrap(), 4.25);
        assert_eq!(marker_range(None, Some(40)).unwrap(), 8.5);
        assert_eq!(marker_range(Some(2.0), None).unwrap(), 2.0);
        assert!(marker_range(None, Some(15)).is_err());
        assert!(marker_range(Some(1.0), Some(10)).is_err());
        assert!(marker_range(Some(-1.0), None).is_err());
    }

    #[test]
    fn report_table_aligns_columns() {
        let t = report_table(&[row("adnn_cells", "corridor", "markers", 0.5), row("ate_m", "lab", "m", 12.25)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.len() == lines[0].len()));
        assert!(lines[2].ends_with("12.250000"));
    }
}
