use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use emloc::detect::{detect_event_start, relative_arrival_times, system_average_frequency};
use emloc::locate::{locate_event, validate, LocateOutcome};
use emloc::measurements::{
    format_sensor_registry, format_traces, load_sensor_registry, load_traces, moving_average,
    FrequencyTrace,
};
use emloc::speedmap::{interior_mask, speed_field};
use emloc::synthetic::{error_report, lag_corrected_event_time, load_scenario, synth_traces};
use emloc::{ArrivalSet, Error, Result, SensorSet};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// What a command produced: the JSON printed to stdout and an exit code.
pub struct Output {
    pub json: Value,
    pub code: i32,
    pub warnings: Vec<String>,
}

impl Output {
    fn ok(json: Value) -> Output {
        Output {
            json,
            code: 0,
            warnings: Vec::new(),
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

struct Inputs {
    registry: SensorSet,
    traces: Vec<FrequencyTrace>,
    dropped: Vec<String>,
}

fn load_inputs(traces: &Path, registry: &Path, cfg: &RunConfig) -> Result<Inputs> {
    let registry = load_sensor_registry(registry)?;
    let file = load_traces(traces, &registry, cfg.min_samples)?;
    Ok(Inputs {
        registry,
        traces: file.traces,
        dropped: file.dropped,
    })
}

fn dropped_warnings(dropped: &[String]) -> Vec<String> {
    if dropped.is_empty() {
        Vec::new()
    } else {
        vec![format!("dropped short traces: {}", dropped.join(", "))]
    }
}

fn write_arrivals(dir: &Path, arrivals: &ArrivalSet) -> Result<()> {
    write(&dir.join("arrivals.csv"), &arrivals.to_csv())?;
    write(&dir.join("arrivals.json"), &arrivals.sidecar_json())
}

pub fn detect(traces: &Path, registry: &Path, out: Option<&Path>, cfg: &RunConfig) -> Result<Output> {
    let inputs = load_inputs(traces, registry, cfg)?;
    let params = &cfg.locate.detection;
    let filtered = inputs
        .traces
        .iter()
        .map(|t| moving_average(t, cfg.locate.filter_window))
        .collect::<Result<Vec<_>>>()?;
    let avg = system_average_frequency(&filtered)?;
    let warnings = dropped_warnings(&inputs.dropped);
    let Some(det) = detect_event_start(&avg, params)? else {
        return Ok(Output {
            json: json!({ "event": null }),
            code: 3,
            warnings,
        });
    };
    let arrivals = relative_arrival_times(&filtered, &det, params)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_arrivals(dir, &arrivals)?;
    }
    let rel: serde_json::Map<String, Value> = arrivals
        .entries
        .iter()
        .map(|a| (a.sensor_id.clone(), json!(a.relative)))
        .collect();
    Ok(Output {
        json: json!({
            "event": {
                "t_start": det.t_start,
                "f_start": det.f_start,
                "f_T": arrivals.f_t,
                "t_R": arrivals.t_r,
                "direction": det.direction,
            },
            "relative_arrivals": rel,
            "omitted": arrivals.omitted,
        }),
        code: 0,
        warnings,
    })
}

fn mesh_sites_csv(outcome: &LocateOutcome) -> String {
    let mut out = String::from("# crs=lonlat-degrees\nindex,sensor_id,lon,lat\n");
    for (k, s) in outcome.sites.sites().iter().enumerate() {
        let _ = writeln!(out, "{k},{},{},{}", s.id, s.lon, s.lat);
    }
    out
}

fn residuals_csv(outcome: &LocateOutcome) -> String {
    let mut out = String::from("sensor_id,distance_mi,delay_s,predicted_s,residual_s\n");
    for r in &outcome.report.residuals {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.sensor_id, r.distance_mi, r.delay_s, r.predicted_s, r.residual_s
        );
    }
    out
}

fn synthetic_section(outcome: &LocateOutcome, scenario: &Path) -> Result<Value> {
    let file = load_scenario(scenario)?;
    let sc = &file.scenario;
    let err = error_report(&outcome.estimate, sc);
    let corrected = lag_corrected_event_time(outcome.estimate.t_event, sc, outcome.arrivals.f_t);
    Ok(json!({
        "source_lon": sc.source[0],
        "source_lat": sc.source[1],
        "t0": sc.t0,
        "distance_error_mi": err.distance_error_mi,
        "t_event_raw": outcome.estimate.t_event,
        "t_event_corrected": corrected,
        "time_error_raw_s": err.time_error_s,
        "time_error_corrected_s": (corrected - sc.t0).abs(),
    }))
}

pub fn locate(
    traces: &Path,
    registry: &Path,
    out: &Path,
    scenario: Option<&Path>,
    cfg: &RunConfig,
) -> Result<Output> {
    let inputs = load_inputs(traces, registry, cfg)?;
    let outcome = locate_event(&inputs.traces, &inputs.registry, &cfg.locate)?;
    let mut report = outcome.report_json();
    if let Some(det) = &outcome.detection {
        report["detection"]["t_start"] = json!(det.t_start);
    }
    if let Some(sc) = scenario {
        report["synthetic"] = synthetic_section(&outcome, sc)?;
    }
    ensure_dir(out)?;
    write(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    write(&out.join("surface.csv"), &outcome.grid.to_csv("relative_arrival_s"))?;
    write(&out.join("mesh_triangles.csv"), &outcome.surface.mesh().triangles_csv())?;
    write(&out.join("mesh_sites.csv"), &mesh_sites_csv(&outcome))?;
    write(&out.join("residuals.csv"), &residuals_csv(&outcome))?;
    write_arrivals(out, &outcome.arrivals)?;
    let mut o = Output::ok(report);
    o.warnings = dropped_warnings(&inputs.dropped);
    if let Some(reason) = &outcome.report.skipped {
        o.warnings.push(format!("validation skipped: {reason}"));
    }
    Ok(o)
}

pub fn speedmap(traces: &Path, registry: &Path, out: &Path, cfg: &RunConfig) -> Result<Output> {
    let inputs = load_inputs(traces, registry, cfg)?;
    let outcome = locate_event(&inputs.traces, &inputs.registry, &cfg.locate)?;
    let field = speed_field(&outcome.grid, &cfg.unit, cfg.gradient_floor)?;
    ensure_dir(out)?;
    write(&out.join("speed.csv"), &field.to_csv())?;

    let interior = interior_mask(&outcome.grid, 2);
    let mut speeds: Vec<f64> = field
        .speeds
        .cells()
        .filter(|c| interior[field.speeds.index(c.0, c.1)])
        .map(|c| c.4)
        .collect();
    speeds.sort_by(f64::total_cmp);
    let median = (!speeds.is_empty()).then(|| speeds[speeds.len() / 2]);
    let cells = field.speeds.unmasked_count();
    let mut o = Output::ok(json!({
        "cells": cells,
        "singular": field.singular_count(),
        "interior_median_speed_mi_per_s": median,
        "gradient_floor_s_per_mi": cfg.gradient_floor,
    }));
    o.warnings = dropped_warnings(&inputs.dropped);
    if cells == 0 {
        o.warnings.push(format!(
            "every cell is singular (gradient below {} s/mi); speed.csv has no data rows",
            cfg.gradient_floor
        ));
    }
    Ok(o)
}

pub fn simulate(scenario: &Path, out: &Path) -> Result<Output> {
    let file = load_scenario(scenario)?;
    let sites = file.sites(scenario.parent())?;
    let traces = synth_traces(&file.scenario, &sites)?;
    ensure_dir(out)?;
    write(&out.join("traces.csv"), &format_traces(file.epoch.as_deref(), &traces))?;
    write(&out.join("registry.csv"), &format_sensor_registry(&sites))?;
    let samples: usize = traces.iter().map(FrequencyTrace::len).sum();
    Ok(Output::ok(json!({
        "sensors": sites.len(),
        "samples": samples,
        "traces": out.join("traces.csv"),
        "registry": out.join("registry.csv"),
    })))
}

/// Sidecar path next to an arrivals CSV: same stem, `.json` extension.
pub fn default_sidecar(arrivals: &Path) -> PathBuf {
    arrivals.with_extension("json")
}

pub fn revalidate(
    report: &Path,
    arrivals: &Path,
    sidecar: &Path,
    registry: &Path,
    cfg: &RunConfig,
) -> Result<Output> {
    let report: Value = serde_json::from_str(&read(report)?)?;
    let field = |k: &str| {
        report["event"][k]
            .as_f64()
            .ok_or_else(|| Error::InvalidArgument(format!("report has no numeric event.{k}")))
    };
    let (lon, lat, t_event) = (field("lon")?, field("lat")?, field("t_event_epoch_s")?);
    let arrivals = ArrivalSet::from_csv(&read(arrivals)?, &read(sidecar)?)?;
    let registry = load_sensor_registry(registry)?;
    let v = validate(&arrivals, &registry, [lon, lat], t_event, &cfg.locate.validation)?;
    let finite = |x: f64| if x.is_finite() { json!(x) } else { Value::Null };
    let residuals: Vec<Value> = v
        .residuals
        .iter()
        .map(|r| {
            json!({
                "sensor_id": r.sensor_id,
                "distance_mi": r.distance_mi,
                "delay_s": r.delay_s,
                "residual_s": r.residual_s,
            })
        })
        .collect();
    let mut o = Output::ok(json!({
        "event": { "lon": lon, "lat": lat, "t_event_epoch_s": t_event },
        "slope_s_per_mile": finite(v.slope),
        "intercept_s": finite(v.intercept),
        "delta_t_threshold_s": finite(v.delta_t_threshold),
        "outliers": v.outliers,
        "skipped": v.skipped,
        "residuals": residuals,
    }));
    if let Some(reason) = &v.skipped {
        o.warnings.push(format!("validation skipped: {reason}"));
    }
    Ok(o)
}
