//! Known-answer events: sensor layouts, straight-ray arrival times and
//! L-shaped frequency traces with optional noise and clock faults.

use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BBox;
use crate::locate::{great_circle_distance, EventEstimate};
use crate::measurements::{FrequencyTrace, Sample, SensorSet, SensorSite};

/// Speed of the disturbance as a function of distance from the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpeedModel {
    /// Miles per second everywhere.
    Constant(f64),
    /// `(outer_radius_mi, speed)` pairs with increasing radii; the last radius
    /// is normally infinite.
    RadialBands(Vec<(f64, f64)>),
}

impl SpeedModel {
    /// Travel time over `distance` miles along a ray from the source.
    pub fn travel_time(&self, distance: f64) -> f64 {
        match self {
            SpeedModel::Constant(v) => distance / v,
            SpeedModel::RadialBands(bands) => {
                let mut inner = 0.0;
                let mut t = 0.0;
                for &(outer, v) in bands {
                    let len = (distance.min(outer) - inner).max(0.0);
                    t += len / v;
                    inner = outer;
                    if inner >= distance {
                        break;
                    }
                }
                t
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SpeedModel::Constant(v) => *v > 0.0 && v.is_finite(),
            SpeedModel::RadialBands(b) => {
                !b.is_empty()
                    && b.iter().all(|&(r, v)| v > 0.0 && v.is_finite() && r > 0.0)
                    && b.windows(2).all(|w| w[0].0 < w[1].0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid speed model {self:?}"
            )))
        }
    }
}

/// A clock error on one sensor: every reported timestamp is late by `offset` s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub sensor_id: String,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    /// `[lon, lat]`, degrees.
    pub source: [f64; 2],
    /// Absolute event time, seconds.
    pub t0: f64,
    pub speed_model: SpeedModel,
    pub f0: f64,
    pub f_final: f64,
    /// Magnitude of the frequency ramp, Hz/s.
    pub ramp_rate: f64,
    pub noise_sd: f64,
    pub reporting_interval: f64,
    /// Time of the first sample.
    pub start: f64,
    /// Samples cover `[start, start + duration)`.
    pub duration: f64,
    pub faults: Vec<Fault>,
    pub seed: u64,
}

impl SyntheticScenario {
    pub fn new(source: [f64; 2], t0: f64, speed_model: SpeedModel) -> Self {
        SyntheticScenario {
            source,
            t0,
            speed_model,
            f0: 60.005,
            f_final: 59.975,
            ramp_rate: 0.01,
            noise_sd: 0.0,
            reporting_interval: 0.1,
            start: 0.0,
            duration: 120.0,
            faults: Vec::new(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.speed_model.validate()?;
        let bad = |what: &str| Err(Error::InvalidArgument(format!("scenario: {what}")));
        if !(self.ramp_rate > 0.0) {
            return bad("ramp_rate must be positive");
        }
        if !(self.noise_sd >= 0.0) {
            return bad("noise_sd must be non-negative");
        }
        if !(self.reporting_interval > 0.0) || !(self.duration > 0.0) {
            return bad("reporting_interval and duration must be positive");
        }
        if self.f0 == self.f_final || !self.f0.is_finite() || !self.f_final.is_finite() {
            return bad("f0 and f_final must differ");
        }
        if !(self.source[1].abs() <= 90.0 && self.source[0].abs() <= 180.0) {
            return bad("source out of range");
        }
        Ok(())
    }

    /// Seconds from arrival until the ramp reaches `f`, for `f` between
    /// `f0` and `f_final`.
    pub fn ramp_delay(&self, f: f64) -> f64 {
        (self.f0 - f).abs() / self.ramp_rate
    }

    /// Noise-free frequency at time `t` for a sensor reached at `t_arr`.
    pub fn frequency_at(&self, t: f64, t_arr: f64) -> f64 {
        if t <= t_arr {
            return self.f0;
        }
        let span = (self.f_final - self.f0).abs();
        let drop = (self.ramp_rate * (t - t_arr)).min(span);
        if self.f_final < self.f0 {
            self.f0 - drop
        } else {
            self.f0 + drop
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration / self.reporting_interval).round() as usize
    }
}

/// Arrival time at `site` (`[lon, lat]`) along the great circle from the source.
pub fn synth_arrival(scenario: &SyntheticScenario, site: [f64; 2]) -> f64 {
    scenario.t0
        + scenario
            .speed_model
            .travel_time(great_circle_distance(scenario.source, site))
}

/// One trace per site, in registry order. Noise is drawn from a single
/// seeded stream, sensor by sensor.
pub fn synth_traces(
    scenario: &SyntheticScenario,
    sites: &SensorSet,
) -> Result<Vec<FrequencyTrace>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise =
        Normal::new(0.0, scenario.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = scenario.num_samples();
    sites
        .sites()
        .iter()
        .map(|site| {
            let t_arr = synth_arrival(scenario, [site.lon, site.lat]);
            let offset = scenario
                .faults
                .iter()
                .filter(|f| f.sensor_id == site.id)
                .map(|f| f.offset)
                .sum::<f64>();
            let samples = (0..n)
                .map(|k| {
                    let t = scenario.start + k as f64 * scenario.reporting_interval;
                    let mut f = scenario.frequency_at(t, t_arr);
                    if scenario.noise_sd > 0.0 {
                        f += noise.sample(&mut rng);
                    }
                    Sample { t: t + offset, f }
                })
                .collect();
            FrequencyTrace::new(site.id.clone(), samples, scenario.reporting_interval)
        })
        .collect()
}

/// `n` sensors on a jittered grid over `bbox`, ids `S001`, `S002`, ...
pub fn jittered_layout(n: usize, bbox: &BBox, seed: u64) -> Result<SensorSet> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "layout needs at least 3 sensors, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid_lat = 0.5 * (bbox.lat_min + bbox.lat_max);
    let w = (bbox.lon_max - bbox.lon_min) * mid_lat.to_radians().cos();
    let h = bbox.lat_max - bbox.lat_min;
    let cols = ((n as f64 * w / h).sqrt().round() as usize).max(1);
    let rows = n.div_ceil(cols);
    let mut cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .collect();
    // Partial Fisher-Yates: the first n cells are a uniform sample.
    for k in 0..n {
        let pick = Uniform::new(k, cells.len())
            .expect("non-empty range")
            .sample(&mut rng);
        cells.swap(k, pick);
    }
    cells.truncate(n);
    cells.sort_unstable();
    let (dx, dy) = ((bbox.lon_max - bbox.lon_min) / cols as f64, h / rows as f64);
    let jitter = Uniform::new(-0.4, 0.4).expect("valid range");
    let sites = cells
        .iter()
        .enumerate()
        .map(|(k, &(r, c))| {
            let lon = bbox.lon_min + (c as f64 + 0.5 + jitter.sample(&mut rng)) * dx;
            let lat = bbox.lat_min + (r as f64 + 0.5 + jitter.sample(&mut rng)) * dy;
            SensorSite::new(format!("S{:03}", k + 1), lat, lon)
        })
        .collect::<Result<Vec<_>>>()?;
    SensorSet::new(sites)
}

/// The continental box used for test layouts.
pub fn continental_bbox() -> BBox {
    BBox {
        lon_min: -125.0,
        lat_min: 24.0,
        lon_max: -66.0,
        lat_max: 50.0,
    }
}

/// A random constant-speed scenario over a fresh layout of `n` sensors; the
/// source is drawn from the middle half of `bbox` so it lies inside the hull.
pub fn random_scenario(
    seed: u64,
    speed: f64,
    n: usize,
    bbox: &BBox,
) -> Result<(SyntheticScenario, SensorSet)> {
    let sites = jittered_layout(n, bbox, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let (w, h) = (bbox.lon_max - bbox.lon_min, bbox.lat_max - bbox.lat_min);
    let lon = Uniform::new(bbox.lon_min + 0.25 * w, bbox.lon_max - 0.25 * w)
        .expect("valid range")
        .sample(&mut rng);
    let lat = Uniform::new(bbox.lat_min + 0.25 * h, bbox.lat_max - 0.25 * h)
        .expect("valid range")
        .sample(&mut rng);
    let mut sc = SyntheticScenario::new([lon, lat], 30.0, SpeedModel::Constant(speed));
    sc.seed = seed;
    Ok((sc, sites))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub distance_error_mi: f64,
    pub time_error_s: f64,
}

/// Distance between the estimate and the true source, and `|t_event - t0|`.
pub fn error_report(estimate: &EventEstimate, scenario: &SyntheticScenario) -> ErrorReport {
    ErrorReport {
        distance_error_mi: great_circle_distance([estimate.lon, estimate.lat], scenario.source),
        time_error_s: (estimate.t_event - scenario.t0).abs(),
    }
}

/// `t_event` with the ramp delay to the detection threshold `f_t` removed.
pub fn lag_corrected_event_time(t_event: f64, scenario: &SyntheticScenario, f_t: f64) -> f64 {
    t_event - scenario.ramp_delay(f_t)
}

/// A scenario plus how to obtain its sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: SyntheticScenario,
    pub sensors: usize,
    pub layout_bbox: BBox,
    pub layout_seed: u64,
    /// Registry CSV to use instead of a generated layout.
    pub registry: Option<String>,
    pub epoch: Option<String>,
}

impl ScenarioFile {
    pub fn sites(&self, base: Option<&Path>) -> Result<SensorSet> {
        match &self.registry {
            Some(p) => {
                let path = base.map_or_else(|| Path::new(p).to_path_buf(), |b| b.join(p));
                crate::measurements::load_sensor_registry(path)
            }
            None => jittered_layout(self.sensors, &self.layout_bbox, self.layout_seed),
        }
    }
}

fn parse_list(value: &str) -> Vec<f64> {
    value
        .split(',')
        .filter_map(|s| s.trim().parse().ok())
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment and `fault` may repeat.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let mut sc = SyntheticScenario::new([f64::NAN, f64::NAN], 30.0, SpeedModel::Constant(500.0));
    let mut file = ScenarioFile {
        scenario: sc.clone(),
        sensors: 40,
        layout_bbox: continental_bbox(),
        layout_seed: 0,
        registry: None,
        epoch: None,
    };
    let mut layout_seed = None;
    for (lineno, raw) in text.lines().enumerate() {
        let row = lineno as u64 + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(row, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::parse(row, format!("`{key}`: not a number: `{value}`")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::parse(row, format!("`{key}`: not an integer: `{value}`")))
        };
        match key {
            "source_lon" => sc.source[0] = num()?,
            "source_lat" => sc.source[1] = num()?,
            "t0" => sc.t0 = num()?,
            "speed" => sc.speed_model = SpeedModel::Constant(num()?),
            "bands" => {
                let mut bands = Vec::new();
                for part in value.split(',') {
                    let (r, v) = part.split_once(':').ok_or_else(|| {
                        Error::parse(row, format!("band `{part}` is not `radius:speed`"))
                    })?;
                    let r = match r.trim() {
                        "inf" | "*" => f64::INFINITY,
                        s => s
                            .parse()
                            .map_err(|_| Error::parse(row, format!("bad band radius `{s}`")))?,
                    };
                    let v = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(row, format!("bad band speed `{v}`")))?;
                    bands.push((r, v));
                }
                sc.speed_model = SpeedModel::RadialBands(bands);
            }
            "f0" => sc.f0 = num()?,
            "f_final" => sc.f_final = num()?,
            "ramp_rate" => sc.ramp_rate = num()?,
            "noise_sd" => sc.noise_sd = num()?,
            "reporting_interval" => sc.reporting_interval = num()?,
            "start" => sc.start = num()?,
            "duration" => sc.duration = num()?,
            "seed" => sc.seed = int()?,
            "fault" => {
                let (id, off) = value.rsplit_once(':').ok_or_else(|| {
                    Error::parse(row, format!("fault `{value}` is not `sensor_id:offset`"))
                })?;
                let offset = off
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(row, format!("bad fault offset `{off}`")))?;
                sc.faults.push(Fault {
                    sensor_id: id.trim().to_string(),
                    offset,
                });
            }
            "sensors" => file.sensors = int()? as usize,
            "layout_seed" => layout_seed = Some(int()?),
            "layout_bbox" => {
                let v = parse_list(value);
                if v.len() != 4 {
                    return Err(Error::parse(
                        row,
                        "layout_bbox needs lon_min,lat_min,lon_max,lat_max",
                    ));
                }
                file.layout_bbox = BBox::new(v[0], v[1], v[2], v[3])?;
            }
            "registry" => file.registry = Some(value.to_string()),
            "epoch" => file.epoch = Some(value.to_string()),
            _ => return Err(Error::parse(row, format!("unknown scenario key `{key}`"))),
        }
    }
    if sc.source.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument(
            "scenario needs source_lon and source_lat".into(),
        ));
    }
    sc.validate()?;
    file.layout_seed = layout_seed.unwrap_or(sc.seed);
    file.scenario = sc;
    Ok(file)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

/// Writes a scenario in the format read by [`parse_scenario`].
pub fn format_scenario(file: &ScenarioFile) -> String {
    let sc = &file.scenario;
    let mut out = String::new();
    let _ = writeln!(out, "source_lon = {}", sc.source[0]);
    let _ = writeln!(out, "source_lat = {}", sc.source[1]);
    let _ = writeln!(out, "t0 = {}", sc.t0);
    match &sc.speed_model {
        SpeedModel::Constant(v) => {
            let _ = writeln!(out, "speed = {v}");
        }
        SpeedModel::RadialBands(b) => {
            let parts: Vec<String> = b
                .iter()
                .map(|(r, v)| {
                    if r.is_infinite() {
                        format!("inf:{v}")
                    } else {
                        format!("{r}:{v}")
                    }
                })
                .collect();
            let _ = writeln!(out, "bands = {}", parts.join(", "));
        }
    }
    for (k, v) in [
        ("f0", sc.f0),
        ("f_final", sc.f_final),
        ("ramp_rate", sc.ramp_rate),
        ("noise_sd", sc.noise_sd),
        ("reporting_interval", sc.reporting_interval),
        ("start", sc.start),
        ("duration", sc.duration),
    ] {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "seed = {}", sc.seed);
    for f in &sc.faults {
        let _ = writeln!(out, "fault = {}:{}", f.sensor_id, f.offset);
    }
    match &file.registry {
        Some(r) => {
            let _ = writeln!(out, "registry = {r}");
        }
        None => {
            let b = &file.layout_bbox;
            let _ = writeln!(out, "sensors = {}", file.sensors);
            let _ = writeln!(out, "layout_seed = {}", file.layout_seed);
            let _ = writeln!(
                out,
                "layout_bbox = {},{},{},{}",
                b.lon_min, b.lat_min, b.lon_max, b.lat_max
            );
        }
    }
    if let Some(e) = &file.epoch {
        let _ = writeln!(out, "epoch = {e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locate::destination;
    use crate::measurements::{crossing_time, moving_average, Direction};

    fn one_site(p: [f64; 2]) -> SensorSet {
        SensorSet::new(vec![SensorSite::new("A", p[1], p[0]).unwrap()]).unwrap()
    }

    #[test]
    fn arrival_examples() {
        let src = [-95.0, 38.0];
        let sc = SyntheticScenario::new(src, 30.0, SpeedModel::Constant(500.0));
        assert_eq!(synth_arrival(&sc, src), 30.0);
        let p = destination(src, 80.0, 500.0);
        assert!((synth_arrival(&sc, p) - 31.0).abs() < 1e-9);

        let bands = SpeedModel::RadialBands(vec![(250.0, 500.0), (f64::INFINITY, 250.0)]);
        assert!((bands.travel_time(500.0) - 1.5).abs() < 1e-12);
        assert_eq!(bands.travel_time(100.0), 0.2);
    }

    #[test]
    fn noiseless_crossing_is_closed_form() {
        let src = [-95.0, 38.0];
        let sc = SyntheticScenario::new(src, 30.0, SpeedModel::Constant(500.0));
        for (k, d) in [0.0, 123.4, 777.0, 1500.0].into_iter().enumerate() {
            let p = destination(src, 40.0 * k as f64, d);
            let tr = &synth_traces(&sc, &one_site(p)).unwrap()[0];
            let f_t = sc.f0 - 0.005;
            let c = crossing_time(tr, f_t, Direction::Falling).unwrap();
            assert!((c - (synth_arrival(&sc, p) + 0.005 / sc.ramp_rate)).abs() < 1e-9);
        }
    }

    #[test]
    fn fault_shifts_crossing() {
        let src = [-95.0, 38.0];
        let p = destination(src, 10.0, 300.0);
        let mut sc = SyntheticScenario::new(src, 30.0, SpeedModel::Constant(500.0));
        let clean = crossing_time(
            &synth_traces(&sc, &one_site(p)).unwrap()[0],
            60.0,
            Direction::Falling,
        )
        .unwrap();
        sc.faults.push(Fault {
            sensor_id: "A".into(),
            offset: 1.0,
        });
        let late = crossing_time(
            &synth_traces(&sc, &one_site(p)).unwrap()[0],
            60.0,
            Direction::Falling,
        )
        .unwrap();
        assert!((late - clean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn filtered_noise_stays_within_three_sigma() {
        let src = [-95.0, 38.0];
        let p = destination(src, 10.0, 300.0);
        let mut sc = SyntheticScenario::new(src, 30.0, SpeedModel::Constant(500.0));
        sc.duration = 60.0;
        let clean = moving_average(&synth_traces(&sc, &one_site(p)).unwrap()[0], 5).unwrap();
        sc.noise_sd = 0.0005;
        let bound = 3.0 * 0.0005 / 5f64.sqrt();
        let (mut inside, mut total) = (0usize, 0usize);
        for seed in 0..100 {
            sc.seed = seed;
            let noisy = moving_average(&synth_traces(&sc, &one_site(p)).unwrap()[0], 5).unwrap();
            for (a, b) in noisy.freqs().zip(clean.freqs()) {
                total += 1;
                inside += usize::from((a - b).abs() < bound);
            }
        }
        let frac = inside as f64 / total as f64;
        assert!(frac >= 0.99, "fraction within bound {frac}");
    }

    #[test]
    fn same_seed_same_traces() {
        let sites = jittered_layout(10, &continental_bbox(), 3).unwrap();
        let mut sc = SyntheticScenario::new([-95.0, 38.0], 30.0, SpeedModel::Constant(500.0));
        sc.noise_sd = 0.001;
        sc.seed = 7;
        assert_eq!(
            synth_traces(&sc, &sites).unwrap(),
            synth_traces(&sc, &sites).unwrap()
        );
        sc.seed = 8;
        assert_ne!(
            synth_traces(&sc, &sites).unwrap()[0],
            synth_traces(
                &{
                    let mut s = sc.clone();
                    s.seed = 7;
                    s
                },
                &sites
            )
            .unwrap()[0]
        );
    }

    #[test]
    fn sample_counts() {
        let sites = jittered_layout(40, &continental_bbox(), 1).unwrap();
        let sc = SyntheticScenario::new([-95.0, 38.0], 30.0, SpeedModel::Constant(500.0));
        let traces = synth_traces(&sc, &sites).unwrap();
        assert_eq!(traces.len(), 40);
        assert!(traces.iter().all(|t| t.len() == 1200));
    }

    #[test]
    fn layout_is_inside_box_and_deterministic() {
        let b = continental_bbox();
        let a = jittered_layout(61, &b, 11).unwrap();
        assert_eq!(a.len(), 61);
        assert!(a.sites().iter().all(|s| s.lon > b.lon_min
            && s.lon < b.lon_max
            && s.lat > b.lat_min
            && s.lat < b.lat_max));
        assert_eq!(a, jittered_layout(61, &b, 11).unwrap());
    }

    #[test]
    fn error_report_examples() {
        let sc = SyntheticScenario::new([-95.0, 38.0], 30.0, SpeedModel::Constant(500.0));
        let mut est = EventEstimate {
            lon: -95.0,
            lat: 38.0,
            t_min: 0.0,
            t_event: 30.0,
            outliers: vec![],
            iterations: 1,
            grid_resolution: 0.02,
        };
        assert_eq!(
            error_report(&est, &sc),
            ErrorReport {
                distance_error_mi: 0.0,
                time_error_s: 0.0
            }
        );
        let p = destination(sc.source, 135.0, 15.8);
        est.lon = p[0];
        est.lat = p[1];
        assert!((error_report(&est, &sc).distance_error_mi - 15.8).abs() < 1e-9);

        // Swapping estimate and source.
        let mut swapped = sc.clone();
        swapped.source = p;
        est.lon = sc.source[0];
        est.lat = sc.source[1];
        assert!((error_report(&est, &swapped).distance_error_mi - 15.8).abs() < 1e-9);
    }

    #[test]
    fn scenario_file_round_trip() {
        let text = "\
# demo
source_lon = -90.5
source_lat = 36.25
t0 = 25
bands = 300:600, inf:400
noise_sd = 0.0005
seed = 7
fault = S004:1.0
sensors = 50
";
        let f = parse_scenario(text).unwrap();
        assert_eq!(f.scenario.faults.len(), 1);
        assert_eq!(f.layout_seed, 7);
        assert_eq!(
            f.scenario.speed_model,
            SpeedModel::RadialBands(vec![(300.0, 600.0), (f64::INFINITY, 400.0)])
        );
        assert_eq!(parse_scenario(&format_scenario(&f)).unwrap(), f);
    }

    #[test]
    fn scenario_errors_carry_row() {
        let err = parse_scenario("source_lon = -90\nsource_lat = x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
        assert!(parse_scenario("t0 = 1\n").is_err());
    }
}
