//! Browser bindings. Every export returns a JSON string; the page owns all drawing.

use emloc::locate::{locate_event, LocateConfig, LocateOutcome};
use emloc::mesh::{Point, TriMesh};
use emloc::speedmap::{speed_field, UnitDistances, DEFAULT_GRADIENT_FLOOR};
use emloc::synthetic::{
    continental_bbox, error_report, jittered_layout, synth_traces, Fault, SpeedModel, SyntheticScenario,
};
use emloc::{Result, ScalarGrid, SensorSet};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Scan resolution for the page, degrees. Coarser than the library default to
/// keep interaction responsive.
pub const DEMO_RESOLUTION: f64 = 0.1;

/// Parameters of one simulated disturbance.
#[derive(Debug, Clone, Copy)]
pub struct DemoScenario {
    pub source_lon: f64,
    pub source_lat: f64,
    pub speed: f64,
    pub sensors: usize,
    pub noise_sd: f64,
    /// Timestamp error applied to one sensor; zero for none.
    pub fault_offset: f64,
    pub seed: u64,
}

fn grid_json(g: &ScalarGrid) -> Value {
    let values: Vec<Value> = g
        .values
        .iter()
        .zip(&g.mask)
        .map(|(v, m)| if *m { json!(v) } else { Value::Null })
        .collect();
    json!({
        "lon0": g.lon0, "lat0": g.lat0, "d_lon": g.d_lon, "d_lat": g.d_lat,
        "n_lon": g.n_lon, "n_lat": g.n_lat, "values": values,
    })
}

fn run(d: &DemoScenario) -> Result<(SyntheticScenario, SensorSet, LocateOutcome)> {
    let sites = jittered_layout(d.sensors, &continental_bbox(), d.seed)?;
    let mut sc = SyntheticScenario::new([d.source_lon, d.source_lat], 30.0, SpeedModel::Constant(d.speed));
    sc.noise_sd = d.noise_sd;
    sc.seed = d.seed;
    if d.fault_offset != 0.0 {
        let victim = &sites.sites()[d.seed as usize % sites.len()];
        sc.faults.push(Fault {
            sensor_id: victim.id.clone(),
            offset: d.fault_offset,
        });
    }
    let traces = synth_traces(&sc, &sites)?;
    let cfg = LocateConfig {
        resolution: DEMO_RESOLUTION,
        ..LocateConfig::default()
    };
    let outcome = locate_event(&traces, &sites, &cfg)?;
    Ok((sc, sites, outcome))
}

/// Simulates the scenario and runs the full location pipeline.
pub fn locate_json(d: &DemoScenario) -> Result<Value> {
    let (sc, sites, out) = run(d)?;
    let err = error_report(&out.estimate, &sc);
    let sensors: Vec<Value> = sites
        .sites()
        .iter()
        .map(|s| json!({ "id": s.id, "lon": s.lon, "lat": s.lat }))
        .collect();
    let mesh = out.surface.mesh();
    let mut outliers = out.estimate.outliers.clone();
    outliers.extend(out.report.outliers.iter().cloned());
    Ok(json!({
        "sensors": sensors,
        "mesh_points": mesh.points(),
        "triangles": mesh.triangles(),
        "surface": grid_json(&out.grid),
        "estimate": { "lon": out.estimate.lon, "lat": out.estimate.lat, "t_event": out.estimate.t_event },
        "truth": { "lon": sc.source[0], "lat": sc.source[1], "t0": sc.t0 },
        "faulted": sc.faults.iter().map(|f| f.sensor_id.clone()).collect::<Vec<_>>(),
        "outliers": outliers,
        "distance_error_mi": err.distance_error_mi,
    }))
}

/// Speed map of the located scenario, miles per second.
pub fn speed_map_json(d: &DemoScenario) -> Result<Value> {
    let (_, _, out) = run(d)?;
    let field = speed_field(&out.grid, &UnitDistances::default(), DEFAULT_GRADIENT_FLOOR)?;
    Ok(json!({
        "speeds": grid_json(&field.speeds),
        "singular": field.singular_count(),
    }))
}

/// Delaunay triangulation of interleaved `x0, y0, x1, y1, ...` coordinates.
pub fn triangulate_json(coords: &[f64]) -> Result<Value> {
    if coords.len() % 2 != 0 {
        return Err(emloc::Error::InvalidArgument("odd number of coordinates".into()));
    }
    let pts: Vec<Point> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let mesh = TriMesh::new(&pts)?;
    Ok(json!({
        "triangles": mesh.triangles(),
        "hull": mesh.hull(),
    }))
}

fn to_js(r: Result<Value>) -> std::result::Result<String, JsValue> {
    r.map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn locate(
    source_lon: f64,
    source_lat: f64,
    speed: f64,
    sensors: u32,
    noise_sd: f64,
    fault_offset: f64,
    seed: u32,
) -> std::result::Result<String, JsValue> {
    to_js(locate_json(&DemoScenario {
        source_lon,
        source_lat,
        speed,
        sensors: sensors as usize,
        noise_sd,
        fault_offset,
        seed: seed as u64,
    }))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn speed_map(
    source_lon: f64,
    source_lat: f64,
    speed: f64,
    sensors: u32,
    noise_sd: f64,
    fault_offset: f64,
    seed: u32,
) -> std::result::Result<String, JsValue> {
    to_js(speed_map_json(&DemoScenario {
        source_lon,
        source_lat,
        speed,
        sensors: sensors as usize,
        noise_sd,
        fault_offset,
        seed: seed as u64,
    }))
}

#[wasm_bindgen]
pub fn triangulate(coords: Vec<f64>) -> std::result::Result<String, JsValue> {
    to_js(triangulate_json(&coords))
}
