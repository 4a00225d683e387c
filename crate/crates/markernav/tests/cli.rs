use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn markernav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_markernav"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap_or_default()).unwrap_or_else(|e| panic!("stderr {stderr:?}: {e}"))
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = markernav(dir.path(), &["teleport"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");
    assert!(markernav(dir.path(), &["--help"]).status.success());
}

#[test]
fn missing_inputs_exit_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = markernav(dir.path(), &["place", "--map", "nowhere.pgm", "--out", "p"]);
    assert_eq!(out.status.code(), Some(3));
    let json = error_json(&out);
    assert_eq!(json["exit_code"], 3);
    assert!(json["message"].as_str().unwrap().contains("nowhere.pgm"));
}

#[test]
fn broken_marker_chain_reports_lost_localization() {
    let dir = tempfile::tempdir().unwrap();
    let sparse = scenario("sparse.toml");
    let out = markernav(dir.path(), &["map", "--scenario", sparse.to_str().unwrap(), "--out", "m"]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_json(&out)["error"], "localization_lost");
}

#[test]
fn range_table_lists_every_marker_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = markernav(dir.path(), &["range-table", "--out", "r.csv"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("4.25") && stdout.contains("8.35"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn mapped_world_feeds_planning_and_a_file_world() {
    let dir = tempfile::tempdir().unwrap();
    let corridor = scenario("corridor.toml");
    let out = markernav(dir.path(), &["map", "--scenario", corridor.to_str().unwrap(), "--out", "m"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["map.pgm", "map.txt", "counts.pgm", "truth.pgm", "trajectory.csv", "truth.csv", "markers.csv"] {
        assert!(dir.path().join("m").join(f).is_file(), "{f} missing");
    }
    let pgm = std::fs::read(dir.path().join("m/map.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));

    // An endpoint off the map is invalid input.
    let out = markernav(dir.path(), &["plan", "--map", "m/truth.pgm", "--from", "0.5,0.7", "--to", "-3,0.7", "--out", "p"]);
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));

    let out = markernav(dir.path(), &["plan", "--map", "m/truth.pgm", "--from", "0.5,0.7", "--to", "11.5,0.7", "--out", "p"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = std::fs::read_to_string(dir.path().join("p/path.csv")).unwrap();
    assert!(path.lines().filter(|l| !l.starts_with('#')).count() >= 3);

    // The truth raster doubles as a world file.
    std::fs::write(
        dir.path().join("file_world.toml"),
        "[run]\nseed = 1\n[world]\nmap = \"m/truth.pgm\"\nmarkers = \"m/markers.csv\"\nroute = [[0.5, 0.7], [11.5, 0.7]]\n",
    )
    .unwrap();
    let out = markernav(dir.path(), &["map", "--scenario", "file_world.toml", "--out", "fw"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = markernav(dir.path(), &["eval", "--map", "fw/map.pgm", "--truth", "m/truth.pgm", "--out", "e"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("e/report.csv")).unwrap();
    assert!(report.contains("adnn_cells"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[world]\nbuiltin = \"corridor\"\nwarp = 9\n").unwrap();
    let out = markernav(dir.path(), &["map", "--scenario", "bad.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["message"].as_str().unwrap().contains("warp"));
}
