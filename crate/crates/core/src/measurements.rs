//! Sensor registries, frequency traces, the centered moving-average filter and
//! sub-sample threshold crossings.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default reporting interval of a 10 Hz sensor, seconds.
pub const DEFAULT_INTERVAL: f64 = 0.1;

/// Default moving-average window for 10 Hz data.
pub const DEFAULT_FILTER_WINDOW: usize = 5;

/// A sensor and where it sits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSite {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub label: Option<String>,
}

impl SensorSite {
    pub fn new(id: impl Into<String>, lat: f64, lon: f64) -> Result<Self> {
        let site = SensorSite {
            id: id.into(),
            lat,
            lon,
            label: None,
        };
        site.check_range()?;
        Ok(site)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    fn check_range(&self) -> Result<()> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(Error::CoordinateOutOfRange {
                id: self.id.clone(),
                lat: self.lat,
                lon: self.lon,
            })
        }
    }
}

/// An ordered collection of sites with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorSet {
    sites: Vec<SensorSite>,
    index: HashMap<String, usize>,
}

impl SensorSet {
    pub fn new(sites: Vec<SensorSite>) -> Result<Self> {
        let mut index = HashMap::with_capacity(sites.len());
        for (i, site) in sites.iter().enumerate() {
            site.check_range()?;
            if index.insert(site.id.clone(), i).is_some() {
                return Err(Error::DuplicateSensor(site.id.clone()));
            }
        }
        Ok(SensorSet { sites, index })
    }

    pub fn sites(&self) -> &[SensorSite] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SensorSite> {
        self.index.get(id).map(|&i| &self.sites[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// The subset of sites whose ids are listed, in the order given.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<SensorSet> {
        let sites = ids
            .into_iter()
            .map(|id| {
                self.get(id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownSensor(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        SensorSet::new(sites)
    }
}

/// Reads a registry CSV with header `id,lat,lon[,label]`. Lines starting with
/// `#` are comments.
pub fn load_sensor_registry(path: impl AsRef<Path>) -> Result<SensorSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_sensor_registry(file)
}

pub fn parse_sensor_registry(reader: impl Read) -> Result<SensorSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "lat" || cols[2] != "lon" {
        return Err(Error::parse(1, "expected header `id,lat,lon[,label]`"));
    }
    let has_label = cols.get(3) == Some(&"label");

    let mut sites = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() < 3 {
            return Err(Error::parse(row, "expected at least 3 fields"));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(row, "empty sensor id"));
        }
        let lat = parse_f64(&record[1], row, "lat")?;
        let lon = parse_f64(&record[2], row, "lon")?;
        let label = if has_label {
            record.get(3).filter(|s| !s.is_empty()).map(str::to_string)
        } else {
            None
        };
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSensor(id));
        }
        let site = SensorSite {
            id,
            lat,
            lon,
            label,
        };
        site.check_range()?;
        sites.push(site);
    }
    SensorSet::new(sites)
}

/// Canonical registry CSV.
pub fn format_sensor_registry(set: &SensorSet) -> String {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(["id", "lat", "lon", "label"])
        .expect("in-memory write");
    for s in set.sites() {
        wtr.write_record([
            s.id.as_str(),
            &s.lat.to_string(),
            &s.lon.to_string(),
            s.label.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    let body = String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8");
    format!("# crs=lonlat-degrees\n{body}")
}

/// One timestamped frequency reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub f: f64,
}

/// One sensor's frequency samples, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    pub sensor_id: String,
    pub samples: Vec<Sample>,
    /// Nominal reporting interval in seconds.
    pub interval: f64,
}

impl FrequencyTrace {
    /// Builds a trace, checking ordering and finiteness.
    pub fn new(sensor_id: impl Into<String>, samples: Vec<Sample>, interval: f64) -> Result<Self> {
        let sensor_id = sensor_id.into();
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reporting interval must be positive, got {interval}"
            )));
        }
        for w in samples.windows(2) {
            if w[1].t == w[0].t {
                return Err(Error::DuplicateTimestamp {
                    id: sensor_id,
                    t: w[0].t,
                });
            }
            if w[1].t < w[0].t {
                return Err(Error::InvalidArgument(format!(
                    "sensor `{sensor_id}`: timestamps not increasing at t={}",
                    w[1].t
                )));
            }
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !s.f.is_finite() || !s.t.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "sensor `{sensor_id}`: non-finite sample at t={}",
                s.t
            )));
        }
        Ok(FrequencyTrace {
            sensor_id,
            samples,
            interval,
        })
    }

    /// A trace from parallel time/frequency slices with the default interval.
    pub fn from_pairs(sensor_id: impl Into<String>, pairs: &[(f64, f64)]) -> Result<Self> {
        let samples = pairs.iter().map(|&(t, f)| Sample { t, f }).collect();
        FrequencyTrace::new(sensor_id, samples, DEFAULT_INTERVAL)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn freqs(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.f)
    }

    /// Same samples with every timestamp moved by `dt`.
    pub fn shifted(&self, dt: f64) -> FrequencyTrace {
        FrequencyTrace {
            sensor_id: self.sensor_id.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    t: s.t + dt,
                    f: s.f,
                })
                .collect(),
            interval: self.interval,
        }
    }

    /// Linear interpolation of frequency at `t`, `None` outside the trace or
    /// inside a gap.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let k = self.samples.partition_point(|s| s.t <= t);
        if k == 0 {
            return None;
        }
        let a = self.samples[k - 1];
        if a.t == t {
            return Some(a.f);
        }
        let b = *self.samples.get(k)?;
        if b.t - a.t > 2.0 * self.interval {
            return None;
        }
        Some(a.f + (t - a.t) * (b.f - a.f) / (b.t - a.t))
    }
}

/// Direction of a frequency excursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Falling,
    Rising,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Falling => "falling",
            Direction::Rising => "rising",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "falling" => Ok(Direction::Falling),
            "rising" => Ok(Direction::Rising),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction `{other}`"
            ))),
        }
    }
}

/// Parsed trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    /// Value of the `# epoch=` comment, if present.
    pub epoch: Option<String>,
    /// One trace per sensor, in registry order.
    pub traces: Vec<FrequencyTrace>,
    /// Sensors dropped for having fewer than the requested minimum samples.
    pub dropped: Vec<String>,
}

/// Reads a trace CSV (`t,sensor_id,f`). Traces shorter than `min_samples` are
/// dropped and listed in [`TraceFile::dropped`].
pub fn load_traces(
    path: impl AsRef<Path>,
    registry: &SensorSet,
    min_samples: usize,
) -> Result<TraceFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_traces(&text, registry, min_samples)
}

pub fn parse_traces(text: &str, registry: &SensorSet, min_samples: usize) -> Result<TraceFile> {
    let epoch = text
        .lines()
        .take_while(|l| l.starts_with('#') || l.trim().is_empty())
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("epoch="))
        .map(|s| s.trim().to_string());

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "sensor_id", "f"] {
        return Err(Error::parse(1, "expected header `t,sensor_id,f`"));
    }

    let mut grouped: Vec<Vec<Sample>> = vec![Vec::new(); registry.len()];
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(0, |p| p.line());
        let t = parse_f64(&record[0], row, "t")?;
        let id = &record[1];
        let f = parse_f64(&record[2], row, "f")?;
        let slot = registry
            .position(id)
            .ok_or_else(|| Error::UnknownSensor(id.to_string()))?;
        grouped[slot].push(Sample { t, f });
    }

    let mut traces = Vec::new();
    let mut dropped = Vec::new();
    for (site, mut samples) in registry.sites().iter().zip(grouped) {
        if samples.is_empty() {
            continue;
        }
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        if samples.len() < min_samples {
            dropped.push(site.id.clone());
            continue;
        }
        let interval = nominal_interval(&samples);
        traces.push(FrequencyTrace::new(site.id.clone(), samples, interval)?);
    }
    Ok(TraceFile {
        epoch,
        traces,
        dropped,
    })
}

/// Canonical trace CSV: epoch comment, header, then rows grouped by trace in
/// time order. Numbers use the shortest representation that round-trips.
pub fn format_traces(epoch: Option<&str>, traces: &[FrequencyTrace]) -> String {
    let rows: usize = traces.iter().map(FrequencyTrace::len).sum();
    let mut out = String::with_capacity(32 + rows * 24);
    if let Some(epoch) = epoch {
        let _ = writeln!(out, "# epoch={epoch}");
    }
    out.push_str("t,sensor_id,f\n");
    for trace in traces {
        for s in &trace.samples {
            let _ = writeln!(out, "{},{},{}", s.t, trace.sensor_id, s.f);
        }
    }
    out
}

/// Median spacing between consecutive samples, or the default for a single
/// sample.
fn nominal_interval(samples: &[Sample]) -> f64 {
    let mut diffs: Vec<f64> = samples
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .filter(|d| *d > 0.0)
        .collect();
    if diffs.is_empty() {
        return DEFAULT_INTERVAL;
    }
    diffs.sort_by(f64::total_cmp);
    diffs[diffs.len() / 2]
}

/// Centered moving average with a window of `window` samples (odd). The window
/// shrinks symmetrically near the ends so the output has the input's length.
pub fn moving_average(trace: &FrequencyTrace, window: usize) -> Result<FrequencyTrace> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "moving-average window must be odd and positive, got {window}"
        )));
    }
    if trace.is_empty() {
        return Err(Error::EmptyTrace(trace.sensor_id.clone()));
    }
    let n = trace.len();
    let half = window / 2;
    let samples = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let center = trace.samples[i].f;
            // Summing deviations from the center keeps constant runs exact.
            let dev: f64 = trace.samples[i - h..=i + h]
                .iter()
                .map(|s| s.f - center)
                .sum();
            Sample {
                t: trace.samples[i].t,
                f: center + dev / (2 * h + 1) as f64,
            }
        })
        .collect();
    Ok(FrequencyTrace {
        sensor_id: trace.sensor_id.clone(),
        samples,
        interval: trace.interval,
    })
}

/// Earliest time the linearly interpolated trace crosses `threshold` in the
/// given direction. Segments longer than twice the reporting interval are
/// treated as gaps and never bridged.
pub fn crossing_time(trace: &FrequencyTrace, threshold: f64, direction: Direction) -> Option<f64> {
    crossing_time_within(
        trace,
        threshold,
        direction,
        f64::NEG_INFINITY..=f64::INFINITY,
    )
}

/// Like [`crossing_time`] but only accepts crossings inside `window`.
pub fn crossing_time_within(
    trace: &FrequencyTrace,
    threshold: f64,
    direction: Direction,
    window: RangeInclusive<f64>,
) -> Option<f64> {
    let max_gap = 2.0 * trace.interval;
    // Work on the signed excursion so both directions share one code path.
    let sign = match direction {
        Direction::Falling => 1.0,
        Direction::Rising => -1.0,
    };
    for w in trace.samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.t < *window.start() {
            continue;
        }
        if a.t > *window.end() {
            break;
        }
        let da = sign * (a.f - threshold);
        let db = sign * (b.f - threshold);
        if !(da > 0.0 && db <= 0.0) || b.t - a.t > max_gap {
            continue;
        }
        let t = if db == 0.0 {
            b.t
        } else {
            a.t + (threshold - a.f) * (b.t - a.t) / (b.f - a.f)
        };
        if window.contains(&t) {
            return Some(t);
        }
    }
    None
}

fn parse_f64(field: &str, row: u64, name: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(row, format!("invalid {name} `{field}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(row, format!("non-finite {name}")))
    }
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line());
    Error::parse(row, e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(fs: &[f64]) -> FrequencyTrace {
        let pairs: Vec<_> = fs
            .iter()
            .enumerate()
            .map(|(i, &f)| (i as f64 * 0.1, f))
            .collect();
        FrequencyTrace::from_pairs("s", &pairs).unwrap()
    }

    #[test]
    fn registry_parses_three_rows() {
        let csv = "id,lat,lon,label\n844,37.75,-100.02,Dodge City\n941,39.02,-99.88,Wakeeney\n647,34.74,-92.29,\n";
        let set = parse_sensor_registry(csv.as_bytes()).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.get("844").unwrap().label.as_deref(), Some("Dodge City"));
        assert_eq!(set.get("647").unwrap().label, None);
    }

    #[test]
    fn registry_rejects_latitude_91() {
        let csv = "id,lat,lon\na,91,0\n";
        assert!(matches!(
            parse_sensor_registry(csv.as_bytes()),
            Err(Error::CoordinateOutOfRange { .. })
        ));
    }

    #[test]
    fn registry_rejects_duplicate_id() {
        let csv = "id,lat,lon\n844,30,-90\n844,31,-91\n";
        match parse_sensor_registry(csv.as_bytes()) {
            Err(Error::DuplicateSensor(id)) => assert_eq!(id, "844"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn registry_reports_row_of_bad_number() {
        let csv = "id,lat,lon\na,30,-90\nb,abc,-91\n";
        match parse_sensor_registry(csv.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn two_site_registry() -> SensorSet {
        SensorSet::new(vec![
            SensorSite::new("a", 30.0, -90.0).unwrap(),
            SensorSite::new("b", 31.0, -91.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn traces_group_per_sensor() {
        let reg = two_site_registry();
        let mut text = String::from("# epoch=2014-11-21T13:48:00Z\nt,sensor_id,f\n");
        for k in 0..100 {
            let t = k as f64 / 10.0;
            text.push_str(&format!("{t},b,60.0\n{t},a,59.99\n"));
        }
        let file = parse_traces(&text, &reg, 5).unwrap();
        assert_eq!(file.epoch.as_deref(), Some("2014-11-21T13:48:00Z"));
        assert_eq!(file.traces.len(), 2);
        assert!(file.traces.iter().all(|t| t.len() == 100));
        assert_eq!(file.traces[0].sensor_id, "a");
        assert!((file.traces[0].interval - 0.1).abs() < 1e-12);
    }

    #[test]
    fn traces_reject_unknown_sensor() {
        let reg = two_site_registry();
        let text = "t,sensor_id,f\n0,zz,60\n";
        match parse_traces(text, &reg, 1) {
            Err(Error::UnknownSensor(id)) => assert_eq!(id, "zz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn traces_reject_duplicate_timestamp() {
        let reg = two_site_registry();
        let text = "t,sensor_id,f\n0,a,60\n0.1,a,60\n0.1,a,59.9\n";
        assert!(matches!(
            parse_traces(text, &reg, 1),
            Err(Error::DuplicateTimestamp { .. })
        ));
    }

    #[test]
    fn short_traces_are_dropped() {
        let reg = two_site_registry();
        let text = "t,sensor_id,f\n0,a,60\n0.1,a,60\n0,b,60\n0.1,b,60\n0.2,b,60\n";
        let file = parse_traces(text, &reg, 3).unwrap();
        assert_eq!(file.traces.len(), 1);
        assert_eq!(file.dropped, vec!["a".to_string()]);
    }

    #[test]
    fn moving_average_of_constant_is_constant() {
        let t = trace(&[60.0; 9]);
        for n in [1, 3, 5, 7] {
            let out = moving_average(&t, n).unwrap();
            assert!(out.freqs().all(|f| f == 60.0));
        }
    }

    #[test]
    fn moving_average_center_sample() {
        let t = trace(&[59.0, 60.0, 61.0, 60.0, 59.0]);
        let out = moving_average(&t, 5).unwrap();
        assert!((out.samples[2].f - 59.8).abs() < 1e-12);
        // Ends shrink symmetrically: index 1 averages indices 0..=2.
        assert!((out.samples[1].f - 60.0).abs() < 1e-12);
        assert_eq!(out.samples[0].f, 59.0);
    }

    #[test]
    fn moving_average_window_one_is_identity() {
        let t = trace(&[59.0, 60.5, 61.0, 60.0]);
        assert_eq!(moving_average(&t, 1).unwrap(), t);
    }

    #[test]
    fn moving_average_rejects_even_window_and_empty_trace() {
        let t = trace(&[60.0, 60.0]);
        assert!(moving_average(&t, 4).is_err());
        let empty = FrequencyTrace::new("e", vec![], 0.1).unwrap();
        assert!(matches!(
            moving_average(&empty, 5),
            Err(Error::EmptyTrace(_))
        ));
    }

    #[test]
    fn crossing_at_linear_midpoint() {
        let t = FrequencyTrace::from_pairs("s", &[(0.0, 60.00), (0.1, 59.99)]).unwrap();
        let c = crossing_time(&t, 59.995, Direction::Falling).unwrap();
        assert!((c - 0.05).abs() < 1e-12);
    }

    #[test]
    fn no_crossing_on_flat_trace() {
        let t = trace(&[60.0; 10]);
        assert_eq!(crossing_time(&t, 59.9, Direction::Falling), None);
    }

    #[test]
    fn crossing_on_exact_sample() {
        let t =
            FrequencyTrace::from_pairs("s", &[(0.0, 60.0), (0.1, 59.995), (0.2, 59.99)]).unwrap();
        assert_eq!(crossing_time(&t, 59.995, Direction::Falling), Some(0.1));
    }

    #[test]
    fn rising_crossing() {
        let t = FrequencyTrace::from_pairs("s", &[(0.0, 60.0), (0.1, 60.0), (0.2, 60.01)]).unwrap();
        let c = crossing_time(&t, 60.005, Direction::Rising).unwrap();
        assert!((c - 0.15).abs() < 1e-12);
        assert_eq!(crossing_time(&t, 60.005, Direction::Falling), None);
    }

    #[test]
    fn crossing_inside_gap_is_not_bridged() {
        let t = FrequencyTrace::new(
            "s",
            vec![
                Sample { t: 0.0, f: 60.0 },
                Sample { t: 0.1, f: 60.0 },
                Sample { t: 0.5, f: 59.9 },
                Sample { t: 0.6, f: 59.9 },
            ],
            0.1,
        )
        .unwrap();
        assert_eq!(crossing_time(&t, 59.95, Direction::Falling), None);
    }

    #[test]
    fn trace_file_round_trips() {
        let reg = two_site_registry();
        let a = FrequencyTrace::from_pairs("a", &[(0.0, 60.001), (0.1, 59.99731), (0.2, 59.9)])
            .unwrap();
        let b = FrequencyTrace::from_pairs("b", &[(0.0, 60.0), (0.1, 60.0000001), (0.2, 60.0)])
            .unwrap();
        let text = format_traces(Some("2014-11-21T13:48:00Z"), &[a, b]);
        let parsed = parse_traces(&text, &reg, 1).unwrap();
        assert_eq!(format_traces(parsed.epoch.as_deref(), &parsed.traces), text);
    }

    proptest! {
        #[test]
        fn moving_average_stays_within_window_bounds(
            fs in prop::collection::vec(59.9f64..60.1, 1..40),
            half in 0usize..4,
        ) {
            let n = 2 * half + 1;
            let t = trace(&fs);
            let out = moving_average(&t, n).unwrap();
            prop_assert_eq!(out.len(), t.len());
            for (i, s) in out.samples.iter().enumerate() {
                prop_assert_eq!(s.t, t.samples[i].t);
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(fs.len() - 1);
                let win = &fs[lo..=hi];
                let min = win.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(s.f >= min - 1e-12 && s.f <= max + 1e-12);
            }
        }

        #[test]
        fn lower_threshold_crosses_later(
            steps in prop::collection::vec(0.0001f64..0.01, 2..30),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let mut f = 60.0;
            let mut fs = vec![f];
            for s in &steps { f -= s; fs.push(f); }
            let t = trace(&fs);
            let span = 60.0 - f;
            let (hi, lo) = (60.0 - span * a.min(b), 60.0 - span * a.max(b));
            if let (Some(t_hi), Some(t_lo)) = (
                crossing_time(&t, hi, Direction::Falling),
                crossing_time(&t, lo, Direction::Falling),
            ) {
                prop_assert!(t_lo >= t_hi);
            }
        }
    }
}
