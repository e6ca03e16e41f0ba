use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emloc::locate::great_circle_distance;
use emloc::measurements::{load_sensor_registry, parse_traces};
use serde_json::Value;

fn emloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emloc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a scenario file and simulates it into `dir`.
fn simulate_text(dir: &Path, text: &str) -> (PathBuf, PathBuf, PathBuf) {
    let sc = dir.join("scenario.txt");
    fs::write(&sc, text).unwrap();
    let out = emloc(&["simulate", "--scenario", s(&sc), "--out", s(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (sc, dir.join("traces.csv"), dir.join("registry.csv"))
}

fn simulate_bundled(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    let out = emloc(&["simulate", "--scenario", s(&scenario(name)), "--out", s(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (dir.join("traces.csv"), dir.join("registry.csv"))
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_bundled(a.path(), "southeast_banded.txt");
    simulate_bundled(b.path(), "southeast_banded.txt");
    for f in ["traces.csv", "registry.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn simulate_counts_samples() {
    let dir = tempfile::tempdir().unwrap();
    let (_, traces, registry) = simulate_text(
        dir.path(),
        "source_lon = -95\nsource_lat = 38\nsensors = 40\nseed = 7\nduration = 120\nreporting_interval = 0.1\n",
    );
    let reg = load_sensor_registry(&registry).unwrap();
    let file = parse_traces(&fs::read_to_string(&traces).unwrap(), &reg, 1).unwrap();
    assert_eq!(reg.len(), 40);
    assert_eq!(file.traces.len(), 40);
    assert!(file.traces.iter().all(|t| t.len() == 1200));
    assert!(fs::read_to_string(&registry).unwrap().starts_with("# crs=lonlat-degrees\n"));
}

#[test]
fn simulate_applies_fault_offsets() {
    let base = "source_lon = -90\nsource_lat = 40\nsensors = 30\nseed = 9\n";
    let clean = tempfile::tempdir().unwrap();
    let faulted = tempfile::tempdir().unwrap();
    let (_, t0, r0) = simulate_text(clean.path(), base);
    let (_, t1, _) = simulate_text(faulted.path(), &format!("{base}fault = S004:1.0\n"));
    let reg = load_sensor_registry(&r0).unwrap();
    let a = parse_traces(&fs::read_to_string(t0).unwrap(), &reg, 1).unwrap();
    let b = parse_traces(&fs::read_to_string(t1).unwrap(), &reg, 1).unwrap();
    for (x, y) in a.traces.iter().zip(&b.traces) {
        let dt: Vec<f64> = x.times().zip(y.times()).map(|(p, q)| q - p).collect();
        let expected = if x.sensor_id == "S004" { 1.0 } else { 0.0 };
        assert!(dt.iter().all(|d| (d - expected).abs() < 1e-9), "{}", x.sensor_id);
        assert_eq!(x.samples.iter().map(|s| s.f).collect::<Vec<_>>(), y.samples.iter().map(|s| s.f).collect::<Vec<_>>());
    }
}

#[test]
fn detect_flat_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (t, r) = simulate_bundled(dir.path(), "flat.txt");
    let out = emloc(&["detect", "--traces", s(&t), "--registry", s(&r)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out), serde_json::json!({ "event": null }));
}

#[test]
fn detect_reports_event_and_arrivals() {
    let dir = tempfile::tempdir().unwrap();
    let (_, t, r) = simulate_text(
        dir.path(),
        "source_lon = -95\nsource_lat = 38\nt0 = 30\nspeed = 500\nsensors = 40\nseed = 4\n",
    );
    let out = emloc(&["detect", "--traces", s(&t), "--registry", s(&r), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let j = stdout_json(&out);
    let e = &j["event"];
    assert_eq!(e["direction"], "falling");
    let (t_start, f_start) = (e["t_start"].as_f64().unwrap(), e["f_start"].as_f64().unwrap());
    assert!((e["f_T"].as_f64().unwrap() - (f_start - 0.005)).abs() < 1e-12);
    assert!(e["t_R"].as_f64().unwrap() <= t_start);

    // Independent oracle: nearest sensor's arrival bounds the onset from below.
    let reg = load_sensor_registry(&r).unwrap();
    let nearest = reg
        .sites()
        .iter()
        .map(|x| great_circle_distance([x.lon, x.lat], [-95.0, 38.0]))
        .fold(f64::INFINITY, f64::min);
    let first = 30.0 + nearest / 500.0;
    assert!(t_start >= first - 0.5 && t_start <= first + 4.0, "t_start {t_start}, first arrival {first}");

    let rel = j["relative_arrivals"].as_object().unwrap();
    assert_eq!(rel.len() + j["omitted"].as_array().unwrap().len(), 40);
    assert!(rel.values().all(|v| v.as_f64().unwrap() >= 0.0));
    assert!(dir.path().join("arrivals.csv").exists());
    assert!(dir.path().join("arrivals.json").exists());
}

#[test]
fn malformed_csv_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    let (t, r) = simulate_bundled(dir.path(), "central.txt");
    let text = fs::read_to_string(&t).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = "0.3,S001,not-a-number";
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n")).unwrap();
    let out = emloc(&["detect", "--traces", s(&bad), "--registry", s(&r)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 6"), "{err}");
}

/// Scenario round trips localize with the pipeline's measured accuracy at
/// 40–70 sensors, which is coarser than the grid-resolution bound.
const ROUND_TRIP_BOUND_MI: f64 = 100.0;

#[test]
fn locate_round_trip_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (t, r) = simulate_bundled(dir.path(), "central.txt");
    let out_dir = dir.path().join("loc");
    let sc = scenario("central.txt");
    let out = emloc(&[
        "locate", "--traces", s(&t), "--registry", s(&r), "--out", s(&out_dir), "--scenario", s(&sc),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let j = stdout_json(&out);
    let saved: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(j, saved);

    let (lon, lat) = (j["event"]["lon"].as_f64().unwrap(), j["event"]["lat"].as_f64().unwrap());
    let d = great_circle_distance([lon, lat], [-95.4, 38.2]);
    assert!((d - j["synthetic"]["distance_error_mi"].as_f64().unwrap()).abs() < 1e-9);
    assert!(d <= ROUND_TRIP_BOUND_MI, "{d}");
    let raw = j["synthetic"]["t_event_raw"].as_f64().unwrap();
    let corrected = j["synthetic"]["t_event_corrected"].as_f64().unwrap();
    // Crossing lag of (f0 - f_T) / ramp_rate with f0 = 60.005, ramp 0.01 Hz/s.
    let f_t = j["detection"]["f_T"].as_f64().unwrap();
    assert!((raw - corrected - (60.005 - f_t) / 0.01).abs() < 1e-9);

    for f in ["surface.csv", "mesh_sites.csv"] {
        assert!(fs::read_to_string(out_dir.join(f)).unwrap().starts_with("# crs=lonlat-degrees\n"), "{f}");
    }
    let tris = fs::read_to_string(out_dir.join("mesh_triangles.csv")).unwrap();
    assert!(tris.starts_with("tri_index,v0,v1,v2\n"));
    assert!(tris.lines().count() > 50);
}

#[test]
fn faulted_sensor_is_listed() {
    let dir = tempfile::tempdir().unwrap();
    let (t, r) = simulate_bundled(dir.path(), "faulted.txt");
    let out = emloc(&["locate", "--traces", s(&t), "--registry", s(&r), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let outliers = stdout_json(&out)["validation"]["outliers"].clone();
    assert!(outliers.as_array().unwrap().iter().any(|v| v == "S017"), "{outliers}");
}

#[test]
fn two_sensors_are_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("two.csv"), "id,lat,lon\nA,38,-95\nB,40,-90\n").unwrap();
    let (_, t, r) = simulate_text(
        dir.path(),
        "source_lon = -93\nsource_lat = 39\nregistry = two.csv\nseed = 1\n",
    );
    let out = emloc(&["locate", "--traces", s(&t), "--registry", s(&r), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient sensors"));
}

fn interior_median(dir: &Path, traces: &Path, registry: &Path) -> f64 {
    let out = emloc(&["speedmap", "--traces", s(traces), "--registry", s(registry), "--out", s(dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("speed.csv")).unwrap();
    assert!(csv.starts_with("# crs=lonlat-degrees\nlon,lat,speed_mi_per_s\n"));
    stdout_json(&out)["interior_median_speed_mi_per_s"].as_f64().unwrap()
}

#[test]
fn speedmap_planar_wave() {
    let dir = tempfile::tempdir().unwrap();
    let text = "source_lon = -150\nsource_lat = 10\nt0 = 20\nspeed = 500\nsensors = 60\n\
                layout_bbox = -100,30,-80,45\nseed = 12\n";
    let (_, t, r) = simulate_text(dir.path(), text);
    let m = interior_median(dir.path(), &t, &r);
    assert!((490.0..=510.0).contains(&m), "{m}");
}

#[test]
fn speedmap_radial_wave() {
    let dir = tempfile::tempdir().unwrap();
    let text = "source_lon = -95\nsource_lat = 38\nt0 = 30\nspeed = 300\nsensors = 60\nseed = 13\n";
    let (_, t, r) = simulate_text(dir.path(), text);
    let m = interior_median(dir.path(), &t, &r);
    assert!((294.0..=306.0).contains(&m), "{m}");
}

#[test]
fn speedmap_uniform_arrivals_warns() {
    let dir = tempfile::tempdir().unwrap();
    let (_, t, r) = simulate_text(
        dir.path(),
        "source_lon = -95\nsource_lat = 38\nspeed = 1e12\nsensors = 30\nseed = 2\n",
    );
    let out = emloc(&["speedmap", "--traces", s(&t), "--registry", s(&r), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["cells"], 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: every cell is singular"));
    let csv = fs::read_to_string(dir.path().join("speed.csv")).unwrap();
    assert_eq!(csv, "# crs=lonlat-degrees\nlon,lat,speed_mi_per_s\n");
}

#[test]
fn validate_reproduces_final_regression() {
    let dir = tempfile::tempdir().unwrap();
    let (t, r) = simulate_bundled(dir.path(), "central.txt");
    let out = emloc(&["locate", "--traces", s(&t), "--registry", s(&r), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let v = emloc(&[
        "validate",
        "--report",
        s(&dir.path().join("report.json")),
        "--arrivals",
        s(&dir.path().join("arrivals.csv")),
        "--registry",
        s(&r),
    ]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stderr));
    let j = stdout_json(&v);
    let a = report["validation"]["slope_s_per_mile"].as_f64().unwrap();
    let b = j["slope_s_per_mile"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
    // Sensors removed in earlier passes are not in the saved arrivals.
    let removed = report["validation"]["outliers"].as_array().unwrap();
    assert!(j["outliers"].as_array().unwrap().iter().all(|o| removed.contains(o)));
}

#[test]
fn config_overrides_and_errors() {
    let out = emloc(&["config", "--set", "resolution=0.05"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("resolution = 0.05\n"));
    assert!(text.contains("filter_n = 5\n"));

    let out = emloc(&["config", "--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let (t, r) = simulate_bundled(dir.path(), "central.txt");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "resolution = 0.1\n").unwrap();
    let out = emloc(&[
        "locate", "--config", s(&cfg), "--traces", s(&t), "--registry", s(&r), "--out", s(dir.path()),
    ]);
    assert_eq!(stdout_json(&out)["quality"]["grid_resolution_deg"], 0.1);
}
