//! Event location: surface argmin, absolute event time, and the
//! validate-and-recompute loop.

pub mod geo;
pub mod validate;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use geo::{destination, great_circle_distance, EARTH_RADIUS_MI};
pub use validate::{validate, SensorResidual, ValidationOptions, ValidationReport};

use crate::detect::{
    detect_event_start, relative_arrival_times, system_average_frequency, ArrivalSet,
    DetectionParams, EventDetection,
};
use crate::error::{Error, Result};
use crate::grid::{BBox, ScalarGrid};
use crate::measurements::{moving_average, FrequencyTrace, SensorSet, DEFAULT_FILTER_WINDOW};
use crate::mesh::TriMesh;
use crate::surface::{fit_surface, ArrivalSurface};

/// Sub-cells per coarse cell edge when refining the argmin.
const REFINE_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LocateConfig {
    pub filter_window: usize,
    pub detection: DetectionParams,
    /// Scan region; the sensor hull's bounding box when `None`.
    pub bbox: Option<BBox>,
    /// Grid cell size, degrees.
    pub resolution: f64,
    /// Most outlier removal passes.
    pub max_iterations: usize,
    pub validation: ValidationOptions,
    pub refine: bool,
}

impl Default for LocateConfig {
    fn default() -> Self {
        LocateConfig {
            filter_window: DEFAULT_FILTER_WINDOW,
            detection: DetectionParams::default(),
            bbox: None,
            resolution: 0.02,
            max_iterations: 3,
            validation: ValidationOptions::default(),
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub lon: f64,
    pub lat: f64,
    /// Surface minimum, seconds after `t_R`.
    pub t_min: f64,
    /// Absolute event time, seconds since the trace epoch.
    pub t_event: f64,
    /// Sensors removed by validation, in removal order.
    pub outliers: Vec<String>,
    /// Number of surface fits performed.
    pub iterations: usize,
    pub grid_resolution: f64,
}

/// Everything the final iteration produced.
#[derive(Debug, Clone)]
pub struct LocateOutcome {
    pub estimate: EventEstimate,
    pub report: ValidationReport,
    /// Fitted to `crossing - datum` over the final sensors.
    pub surface: ArrivalSurface,
    pub datum: f64,
    /// Surface sampled on the scan grid, seconds after `t_R`.
    pub grid: ScalarGrid,
    pub arrivals: ArrivalSet,
    pub sites: SensorSet,
    pub detection: Option<EventDetection>,
}

impl LocateOutcome {
    /// The JSON event report.
    pub fn report_json(&self) -> serde_json::Value {
        let e = &self.estimate;
        let mut outliers = e.outliers.clone();
        outliers.extend(self.report.outliers.iter().cloned());
        json!({
            "event": {
                "lon": e.lon,
                "lat": e.lat,
                "t_event_epoch_s": e.t_event,
                "t_min_s": e.t_min,
            },
            "detection": {
                "t_R": self.arrivals.t_r,
                "f_T": self.arrivals.f_t,
                "direction": self.arrivals.direction,
            },
            "validation": {
                "slope_s_per_mile": finite_or_null(self.report.slope),
                "delta_t_threshold_s": finite_or_null(self.report.delta_t_threshold),
                "outliers": outliers,
                "skipped": self.report.skipped,
            },
            "quality": {
                "iterations": e.iterations,
                "sensors_used": self.arrivals.len(),
                "grid_resolution_deg": e.grid_resolution,
            },
        })
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

/// Cell center holding the smallest value. Ties go to the smallest latitude,
/// then the smallest longitude.
pub fn find_minimum(grid: &ScalarGrid) -> Result<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, j, _, _, v) in grid.cells() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v < b.2) {
            best = Some((i, j, v));
        }
    }
    best.ok_or(Error::EmptyGrid)
}

/// Best point on a `REFINE_FACTOR`-times finer grid over the 3x3 cells around
/// `(i, j)`; the coarse cell center itself stays a candidate.
pub fn refine_minimum(surface: &ArrivalSurface, grid: &ScalarGrid, i: usize, j: usize) -> [f64; 3] {
    let (lon_c, lat_c) = (grid.lon(j), grid.lat(i));
    let mut best = [lon_c, lat_c, grid.get(i, j).unwrap_or(f64::INFINITY)];
    let n = 3 * REFINE_FACTOR;
    let (dx, dy) = (
        grid.d_lon / REFINE_FACTOR as f64,
        grid.d_lat / REFINE_FACTOR as f64,
    );
    let (x0, y0) = (lon_c - 1.5 * grid.d_lon, lat_c - 1.5 * grid.d_lat);
    let mut hint = 0;
    for a in 0..n {
        let lat = y0 + (a as f64 + 0.5) * dy;
        for b in 0..n {
            let lon = x0 + (b as f64 + 0.5) * dx;
            if let Ok(v) = surface.eval_with_hint(lon, lat, &mut hint) {
                let better = v < best[2] || (v == best[2] && (lat, lon) < (best[1], best[0]));
                if better {
                    best = [lon, lat, v];
                }
            }
        }
    }
    best
}

/// Full pipeline from raw traces: filter, detect, extract arrivals, locate.
pub fn locate_event(
    traces: &[FrequencyTrace],
    registry: &SensorSet,
    cfg: &LocateConfig,
) -> Result<LocateOutcome> {
    for t in traces {
        if !registry.contains(&t.sensor_id) {
            return Err(Error::UnknownSensor(t.sensor_id.clone()));
        }
    }
    let filtered = traces
        .iter()
        .map(|t| moving_average(t, cfg.filter_window))
        .collect::<Result<Vec<_>>>()?;
    let avg = system_average_frequency(&filtered)?;
    let detection = detect_event_start(&avg, &cfg.detection)?.ok_or(Error::NoEvent)?;
    let arrivals = relative_arrival_times(&filtered, &detection, &cfg.detection)?;
    let mut out = locate_from_arrivals(&arrivals, registry, cfg)?;
    out.detection = Some(detection);
    Ok(out)
}

struct Pass {
    lon: f64,
    lat: f64,
    datum: f64,
    surface: ArrivalSurface,
    grid: ScalarGrid,
    sites: SensorSet,
    s_min: f64,
}

fn fit_and_scan(arrivals: &ArrivalSet, registry: &SensorSet, cfg: &LocateConfig) -> Result<Pass> {
    let sites = registry.subset(arrivals.ids())?;
    let points: Vec<[f64; 2]> = sites.sites().iter().map(|s| [s.lon, s.lat]).collect();
    let mesh = TriMesh::new(&points)?;
    // Fitting against the earliest absolute crossing keeps the surface
    // independent of the reference time.
    let datum = arrivals
        .entries
        .iter()
        .map(|a| a.crossing)
        .fold(f64::INFINITY, f64::min);
    let values: Vec<f64> = arrivals
        .entries
        .iter()
        .map(|a| a.crossing - datum)
        .collect();
    let surface = fit_surface(mesh, &values)?;

    let hull_box = BBox::around(points.iter().copied()).expect("at least three sites");
    let scan = match &cfg.bbox {
        Some(b) => b.intersect(&hull_box).ok_or(Error::EmptyGrid)?,
        None => hull_box,
    };
    let grid = surface.eval_grid(&scan, cfg.resolution)?;
    let (i, j, v) = find_minimum(&grid)?;
    let [lon, lat, s_min] = if cfg.refine {
        refine_minimum(&surface, &grid, i, j)
    } else {
        [grid.lon(j), grid.lat(i), v]
    };
    Ok(Pass {
        lon,
        lat,
        datum,
        surface,
        grid,
        sites,
        s_min,
    })
}

/// Locates the event from already extracted arrivals, removing sensors that
/// fail validation and refitting until none remain or the pass limit is hit.
pub fn locate_from_arrivals(
    arrivals: &ArrivalSet,
    registry: &SensorSet,
    cfg: &LocateConfig,
) -> Result<LocateOutcome> {
    if !(cfg.resolution > 0.0 && cfg.resolution.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be positive, got {}",
            cfg.resolution
        )));
    }
    let mut current = arrivals.clone();
    let mut removed: Vec<String> = Vec::new();
    let mut iterations = 0;
    loop {
        if current.len() < 3 {
            return Err(Error::InsufficientSensors {
                have: current.len(),
                need: 3,
            });
        }
        iterations += 1;
        let pass = fit_and_scan(&current, registry, cfg)?;
        let t_event = pass.datum + pass.s_min;
        let report = validate(
            &current,
            &pass.sites,
            [pass.lon, pass.lat],
            t_event,
            &cfg.validation,
        )?;
        if report.outliers.is_empty() || iterations > cfg.max_iterations {
            let t_r = current.t_r;
            let offset = pass.datum - t_r;
            return Ok(LocateOutcome {
                estimate: EventEstimate {
                    lon: pass.lon,
                    lat: pass.lat,
                    t_min: t_event - t_r,
                    t_event,
                    outliers: removed,
                    iterations,
                    grid_resolution: cfg.resolution,
                },
                report,
                grid: pass.grid.map(|v| v + offset),
                surface: pass.surface,
                datum: pass.datum,
                arrivals: current,
                sites: pass.sites,
                detection: None,
            });
        }
        current = current.without(&report.outliers);
        removed.extend(report.outliers);
    }
}
