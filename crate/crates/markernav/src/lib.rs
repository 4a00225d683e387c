//! Command-line front end and file formats for the marker navigation
//! toolkit: scenario configs, PGM grids, CSV logs and reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod pgm;
pub mod tables;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use markernav_core::angle;
use markernav_core::geometry::Pose2D;
use markernav_core::placement::CornerRule;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "markernav", version, about = "Marker-based mapping, placement, planning and navigation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CornerArg {
    Both,
    Any,
    Never,
}

impl From<CornerArg> for CornerRule {
    fn from(c: CornerArg) -> Self {
        match c {
            CornerArg::Both => CornerRule::BothBelowHalf,
            CornerArg::Any => CornerRule::AnyBelowHalf,
            CornerArg::Never => CornerRule::Never,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scripted mapping run: writes the occupancy grid, counts and logs.
    Map {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Marker placement on a grid map, with an optional count-vs-range curve.
    Place {
        #[arg(long)]
        map: PathBuf,
        /// Marker range in metres.
        #[arg(long, conflicts_with = "size")]
        range: Option<f64>,
        /// Marker size in cm; the range is its tracking distance.
        #[arg(long)]
        size: Option<u32>,
        /// Comma-separated ranges (metres) for curve.csv.
        #[arg(long, value_delimiter = ',')]
        curve: Vec<f64>,
        #[arg(long, value_enum, default_value = "both")]
        corners: CornerArg,
        /// Use obstacles as stored instead of thinning them first.
        #[arg(long)]
        no_thin: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Shortest path over the clearance skeleton between two poses.
    Plan {
        #[arg(long)]
        map: PathBuf,
        /// x,y or x,y,theta_deg in metres.
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        from: Pose2D,
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        to: Pose2D,
        /// Marker CSV; when given each waypoint is assigned a marker.
        #[arg(long)]
        markers: Option<PathBuf>,
        /// Marker range in metres used for the assignment.
        #[arg(long, default_value_t = 4.25)]
        range: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-loop waypoint navigation with marker localization.
    Navigate {
        #[arg(long)]
        scenario: PathBuf,
        /// Waypoints from a path.csv written by `plan`.
        #[arg(long)]
        path: Option<PathBuf>,
        /// Marker CSV to localize against instead of the world's markers.
        #[arg(long)]
        markers: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Map and trajectory accuracy against ground truth.
    Eval {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, requires = "truth_trajectory")]
        trajectory: Option<PathBuf>,
        #[arg(long, requires = "trajectory")]
        truth_trajectory: Option<PathBuf>,
        #[arg(long, default_value = "simulation")]
        environment: String,
        #[arg(long, default_value = "markers")]
        method: String,
        /// Average both nearest-neighbour directions.
        #[arg(long)]
        symmetric: bool,
        /// Largest timestamp gap accepted when pairing poses, seconds.
        #[arg(long, default_value_t = 0.02)]
        max_gap: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Detection ranges per marker size.
    RangeTable {
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pose(s: &str) -> std::result::Result<Pose2D, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        [x, y] => Ok(Pose2D::new(*x, *y, 0.0)),
        [x, y, th] => Ok(Pose2D::new(*x, *y, angle::deg(*th))),
        _ => Err("expected x,y or x,y,theta_deg".into()),
    }
}

/// Runs one parsed command and returns its stdout summary.
pub fn run(cli: Cli) -> Result<String> {
    use commands::*;
    match cli.command {
        Command::Map { scenario, out, seed } => cmd_map(&ScenarioRun::load(&scenario, out, seed)?),
        Command::Place {
            map,
            range,
            size,
            curve,
            corners,
            no_thin,
            out,
            seed,
        } => cmd_place(&PlaceArgs {
            map,
            range,
            size_cm: size,
            curve,
            corner_rule: corners.into(),
            thin: !no_thin,
            out,
            seed,
        }),
        Command::Plan {
            map,
            from,
            to,
            markers,
            range,
            out,
            seed,
        } => cmd_plan(&PlanArgs {
            map,
            from,
            to,
            markers,
            range,
            out,
            seed,
        }),
        Command::Navigate {
            scenario,
            path,
            markers,
            out,
            seed,
        } => cmd_navigate(&ScenarioRun::load(&scenario, out, seed)?, &NavigateArgs { path, markers }),
        Command::Eval {
            map,
            truth,
            trajectory,
            truth_trajectory,
            environment,
            method,
            symmetric,
            max_gap,
            out,
            seed,
        } => cmd_eval(&EvalArgs {
            map,
            truth,
            trajectory,
            truth_trajectory,
            environment,
            method,
            symmetric,
            max_gap,
            out,
            seed,
        }),
        Command::RangeTable { out } => {
            let bytes = range_table_csv()?;
            if let Some(p) = out {
                pgm::write_file(&p, &bytes)?;
            }
            Ok(String::from_utf8_lossy(&bytes).lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poses_parse_with_optional_heading() {
        let p = parse_pose("1.5,-2").unwrap();
        assert_eq!((p.x, p.y, p.theta), (1.5, -2.0, 0.0));
        let q = parse_pose("0, 0, 90").unwrap();
        assert!((q.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(parse_pose("1").is_err());
        assert!(parse_pose("a,b").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
