use std::f64::consts::PI;
use std::path::Path;
use std::process::Command as Process;

use fmcf_cli::curvefile::{format_curves, parse_curves};
use fmcf_cli::{execute, exit, parse_config_with_env, BarrierJob, CliConfig, CliError, Command, Geometry, ScenarioJob, CURVATURE_COLUMNS};
use fmcf_core::flow::CSV_COLUMNS;
use fmcf_core::scenarios::TIMESERIES_COLUMNS;
use fmcf_core::{ClosedCurve, Vec2};
use serde_json::Value;

fn parse(args: &[&str]) -> Result<CliConfig, CliError> {
    parse_config_with_env(std::iter::once("fmcf").chain(args.iter().copied()), |_| None)
}

fn parse_in(dir: &Path, args: &[&str]) -> CliConfig {
    let out = dir.to_str().unwrap();
    let mut all = args.to_vec();
    all.extend(["--out-dir", out]);
    parse(&all).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Lines after the `#` header of an artifact.
fn body(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn circle_flags_map_to_builtin_shape() {
    let c = parse(&["curvature", "--shape", "circle", "--radius", "1", "--s", "0.5"]).unwrap();
    assert_eq!(c.s.get(), 0.5);
    // default node count follows the default spacing 2π/512
    assert_eq!(c.command, Command::Curvature { geometry: Geometry::Circle { radius: 1.0, nodes: 512 }, node: None, t: 0.0 });
}

#[test]
fn order_outside_unit_interval_is_usage_error() {
    let e = parse(&["curvature", "--shape", "circle", "--s", "1.5"]).unwrap_err();
    assert_eq!(e.exit_code(), exit::USAGE);
    assert!(e.to_string().contains("s:"), "{e}");
}

#[test]
fn flags_override_file_override_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.toml");
    std::fs::write(&file, "s = 0.3\nthreads = 2\n[quad]\nrel_tol = 1e-6\n[geometry]\nshape = \"circle\"\nradius = 2.0\n").unwrap();
    let f = file.to_str().unwrap();
    let from_file = parse(&["--config", f, "curvature"]).unwrap();
    assert_eq!(from_file.s.get(), 0.3);
    assert_eq!(from_file.threads, 2);
    assert_eq!(from_file.quad.rel_tol, 1e-6);
    assert_eq!(from_file.flow.quad, from_file.quad);
    assert!(matches!(from_file.command, Command::Curvature { geometry: Geometry::Circle { radius, .. }, .. } if radius == 2.0));
    let flagged = parse(&["--config", f, "curvature", "--s", "0.5", "--radius", "3"]).unwrap();
    assert_eq!(flagged.s.get(), 0.5);
    assert!(matches!(flagged.command, Command::Curvature { geometry: Geometry::Circle { radius, .. }, .. } if radius == 3.0));
    assert_eq!(flagged.quad.abs_tol, fmcf_core::QuadConfig::default().abs_tol);
}

#[test]
fn unknown_file_keys_are_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, "s = 0.5\n[quad]\nrel_tolerance = 1e-3\n").unwrap();
    let e = parse(&["--config", file.to_str().unwrap(), "curvature", "--shape", "half-plane"]).unwrap_err();
    assert_eq!(e.exit_code(), exit::USAGE);
    assert!(e.to_string().contains("rel_tolerance"), "{e}");
}

#[test]
fn invalid_overrides_name_the_key() {
    for (args, key) in [
        (vec!["flow", "--shape", "circle", "--cfl", "2"], "cfl"),
        (vec!["curvature", "--shape", "circle", "--rel-tol", "-1"], "rel_tol"),
        (vec!["curvature", "--shape", "ellipse", "--a", "1"], "b:"),
        (vec!["curvature", "--shape", "circle", "--nodes", "3"], "nodes:"),
        (vec!["curvature", "--shape", "circle", "--curve", "x.txt"], "geometry"),
        (vec!["flow", "--shape", "slab", "--half-width", "1"], "shape"),
        (vec!["barrier", "--name", "strip-positivity", "--epsilon", "0.1"], "delta"),
    ] {
        let e = parse(&args).unwrap_err();
        assert_eq!(e.exit_code(), exit::USAGE, "{args:?}");
        assert!(e.to_string().contains(key), "{args:?}: {e}");
    }
    // clap syntax errors share the usage exit code
    assert_eq!(parse(&["curvature", "--bogus"]).unwrap_err().exit_code(), exit::USAGE);
    assert_eq!(parse(&["--help"]).unwrap_err().exit_code(), exit::OK);
}

#[test]
fn threads_default_from_environment() {
    let env = |k: &str| (k == fmcf_cli::THREADS_ENV).then(|| "3".to_string());
    let c = parse_config_with_env(["fmcf", "scenario", "--name", "neckpinch"], env).unwrap();
    assert_eq!(c.threads, 3);
    assert_eq!(c.command, Command::Scenario { job: ScenarioJob::Neckpinch });
    let c = parse_config_with_env(["fmcf", "--threads", "1", "scenario", "--name", "neckpinch"], env).unwrap();
    assert_eq!(c.threads, 1);
    let bad = parse_config_with_env(["fmcf", "scenario", "--name", "neckpinch"], |_| Some("many".into())).unwrap_err();
    assert_eq!(bad.exit_code(), exit::USAGE);
}

#[test]
fn half_plane_curvature_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_in(dir.path(), &["curvature", "--shape", "half-plane", "--s", "0.5", "--t", "1.7"]);
    let out = execute(&c).unwrap();
    assert_eq!(out.exit_code, exit::OK);
    let doc = read_json(&dir.path().join("curvature.json"));
    assert!(doc["result"]["curvature"]["value"].as_f64().unwrap().abs() < c.quad.abs_tol);
    assert_eq!(doc["format_version"], fmcf_cli::FORMAT_VERSION);
    assert_eq!(doc["config"]["command"]["geometry"]["kind"], "half-plane");
    assert_eq!(out.summary.lines().count(), 1);
}

#[test]
fn strip_positivity_report() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_in(dir.path(), &["barrier", "--name", "strip-positivity", "--epsilon", "0.1", "--delta", "0.05", "--s", "0.5"]);
    assert_eq!(c.command, Command::Barrier { job: BarrierJob::StripPositivity { epsilon: 0.1, delta: 0.05, samples: 64 } });
    let out = execute(&c).unwrap();
    assert_eq!(out.exit_code, exit::OK);
    let doc = read_json(&dir.path().join("barrier-strip-positivity.json"));
    assert!(doc["result"]["min_value"].as_f64().unwrap() > 0.0);
    let rows = body(&dir.path().join("barrier-strip-positivity.csv"));
    assert_eq!(rows[0], fmcf_cli::STRIP_COLUMNS.join(","));
    assert_eq!(rows.len(), 65);
}

#[test]
fn shrinking_circle_scenario_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let spacing = (2.0 * PI / 256.0).to_string();
    let c = parse_in(dir.path(), &["scenario", "--name", "shrinking-circle", "--s", "0.5", "--target-spacing", &spacing]);
    let out = execute(&c).unwrap();
    assert_eq!(out.exit_code, exit::OK, "{}", out.summary);
    let doc = read_json(&dir.path().join("scenario-shrinking-circle.json"));
    assert_eq!(doc["result"]["verdict"], "reproduced");
    assert_eq!(doc["config"]["flow"]["target_spacing"].as_f64().unwrap(), 2.0 * PI / 256.0);
    let rows = body(&dir.path().join("scenario-shrinking-circle.csv"));
    assert_eq!(rows[0], TIMESERIES_COLUMNS.join(","));
}

#[test]
fn truncated_scenario_is_numerical_failure_and_failed_check_is_not_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    // three steps fail the extinction check
    let c = parse_in(dir.path(), &["scenario", "--name", "shrinking-circle", "--target-spacing", "0.1", "--max-steps", "3"]);
    assert_eq!(execute(&c).unwrap().exit_code, exit::NOT_REPRODUCED);
}

#[test]
fn curve_file_round_trip_and_curvature_csv() {
    let dir = tempfile::tempdir().unwrap();
    let square = ClosedCurve::new((0..64).map(|k| {
        let t = k as f64 / 16.0;
        match k / 16 {
            0 => Vec2::new(t, 0.0),
            1 => Vec2::new(1.0, t - 1.0),
            2 => Vec2::new(3.0 - t, 1.0),
            _ => Vec2::new(0.0, 4.0 - t),
        }
    }).collect()).unwrap();
    let other = ClosedCurve::circle(Vec2::new(3.0, 0.5), 0.25, 32).unwrap();
    let text = format_curves(&[square.clone(), other.clone()]);
    let back = parse_curves(&text, "mem").unwrap();
    assert_eq!(back, vec![square, other]);
    let path = dir.path().join("shape.txt");
    std::fs::write(&path, format!("# two fronts\n{text}")).unwrap();
    let c = parse_in(dir.path(), &["curvature", "--curve", path.to_str().unwrap(), "--s", "0.4"]);
    assert_eq!(execute(&c).unwrap().exit_code, exit::OK);
    let rows = body(&dir.path().join("curvature.csv"));
    assert_eq!(rows[0], CURVATURE_COLUMNS.join(","));
    assert_eq!(rows.len(), 1 + 64 + 32);
    let doc = read_json(&dir.path().join("curvature.json"));
    assert_eq!(doc["result"]["fronts"], 2);
}

#[test]
fn malformed_curve_files_are_usage_errors() {
    for text in ["1 2\n3\n", "1 2 3\n", "a b\n", "", "0 0\n1 0\n"] {
        let e = parse_curves(text, "mem").unwrap_err();
        assert_eq!(e.exit_code(), exit::USAGE, "{text:?}");
    }
}

#[test]
fn flow_writes_trajectory_and_final_curve() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_in(dir.path(), &["flow", "--shape", "circle", "--radius", "0.5", "--target-spacing", "0.02", "--t-max", "0.002", "--snapshot-stride", "5"]);
    let out = execute(&c).unwrap();
    assert_eq!(out.exit_code, exit::OK);
    let rows = body(&dir.path().join("flow.csv"));
    assert_eq!(rows[0], CSV_COLUMNS.join(","));
    let final_text = std::fs::read_to_string(dir.path().join("flow-final.txt")).unwrap();
    let fronts = parse_curves(&final_text, "final").unwrap();
    assert_eq!(fronts.len(), 1);
    assert!(fronts[0].area() < PI * 0.25);
    let doc = read_json(&dir.path().join("flow.json"));
    let snaps = doc["result"]["summary"]["snapshots"].as_array().unwrap();
    assert_eq!(snaps.last().unwrap()["time"].as_f64().unwrap(), 0.002);
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["curvature", "--shape", "ellipse", "--a", "1.5", "--b", "0.5", "--nodes", "200", "--out-dir", dir.path().to_str().unwrap()];
    let c = parse(&args).unwrap();
    execute(&c).unwrap();
    let first: Vec<Vec<u8>> = ["curvature.csv", "curvature.json"].iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
    // a different worker count must not change the numbers
    let again = CliConfig { threads: 1, ..c.clone() };
    execute(&c).unwrap();
    let second: Vec<Vec<u8>> = ["curvature.csv", "curvature.json"].iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
    assert_eq!(first, second);
    execute(&again).unwrap();
    assert_eq!(body(&dir.path().join("curvature.csv")), String::from_utf8(first[0].clone()).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>());
}

#[test]
fn unwritable_output_is_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let c = parse(&["curvature", "--shape", "half-plane", "--out-dir", blocker.join("sub").to_str().unwrap()]).unwrap();
    let e = execute(&c).unwrap_err();
    assert_eq!(e.exit_code(), exit::NUMERICAL);
}

#[test]
fn binary_exit_codes_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_fmcf");
    let ok = Process::new(bin).args(["curvature", "--shape", "half-plane", "--s", "0.5"]).current_dir(dir.path()).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("H_s = "));
    assert!(dir.path().join("curvature.json").exists());
    let bad = Process::new(bin).args(["curvature", "--shape", "circle", "--s", "1.5"]).current_dir(dir.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("s:"));
}
