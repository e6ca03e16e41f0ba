//! Event detection on the system-average frequency and extraction of per-sensor
//! relative arrival times.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::{crossing_time_within, Direction, FrequencyTrace, Sample};

/// Thresholds for confirming an event on the average frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Drop below the event-start frequency that defines the crossing threshold, Hz.
    pub delta_f: f64,
    /// Minimum |ROCOF| counted as event activity, Hz/s.
    pub rocof_threshold: f64,
    /// Fraction of the confirmation window that must exceed the ROCOF threshold.
    pub majority_fraction: f64,
    /// Length of the confirmation window, seconds.
    pub confirm_window: f64,
    /// Crossings later than this after the reference time do not participate, seconds.
    pub max_delay: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            delta_f: 0.005,
            rocof_threshold: 0.001,
            majority_fraction: 0.75,
            confirm_window: 4.0,
            max_delay: 30.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta_f", self.delta_f),
            ("rocof_threshold", self.rocof_threshold),
            ("majority_fraction", self.majority_fraction),
            ("confirm_window", self.confirm_window),
            ("max_delay", self.max_delay),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.majority_fraction > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "majority_fraction must be at most 1, got {}",
                self.majority_fraction
            )));
        }
        Ok(())
    }
}

/// A confirmed event on the average frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventDetection {
    pub t_start: f64,
    /// Average frequency at `t_start`.
    pub f_start: f64,
    pub f_t: f64,
    pub t_r: f64,
    pub direction: Direction,
}

/// Mean of all traces on the nominal tick grid `k * interval`. A tick is kept
/// when at least half of the traces report within half an interval of it.
pub fn system_average_frequency(traces: &[FrequencyTrace]) -> Result<FrequencyTrace> {
    if traces.is_empty() {
        return Err(Error::InsufficientSensors { have: 0, need: 1 });
    }
    let mut intervals: Vec<f64> = traces.iter().map(|t| t.interval).collect();
    intervals.sort_by(f64::total_cmp);
    let dt = intervals[intervals.len() / 2];

    let mut ticks: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for trace in traces {
        // Closest sample per tick for this sensor.
        let mut own: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for s in &trace.samples {
            let k = (s.t / dt).round() as i64;
            let off = (s.t - k as f64 * dt).abs();
            if off > dt / 2.0 {
                continue;
            }
            own.entry(k)
                .and_modify(|e| {
                    if off < e.0 {
                        *e = (off, s.f)
                    }
                })
                .or_insert((off, s.f));
        }
        for (k, (_, f)) in own {
            let e = ticks.entry(k).or_insert((0.0, 0));
            e.0 += f;
            e.1 += 1;
        }
    }

    let quorum = traces.len() as f64 * 0.5;
    let samples: Vec<Sample> = ticks
        .into_iter()
        .filter(|(_, (_, n))| *n as f64 >= quorum)
        .map(|(k, (sum, n))| Sample {
            t: k as f64 * dt,
            f: sum / n as f64,
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::NoCoverage);
    }
    FrequencyTrace::new("average", samples, dt)
}

/// Backward difference quotient, stamped at the later sample.
pub fn rocof(trace: &FrequencyTrace) -> Result<FrequencyTrace> {
    if trace.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "ROCOF needs at least 2 samples, `{}` has {}",
            trace.sensor_id,
            trace.len()
        )));
    }
    let samples = trace
        .samples
        .windows(2)
        .map(|w| Sample {
            t: w[1].t,
            f: (w[1].f - w[0].f) / (w[1].t - w[0].t),
        })
        .collect();
    Ok(FrequencyTrace {
        sensor_id: format!("{}:rocof", trace.sensor_id),
        samples,
        interval: trace.interval,
    })
}

/// Finds the event start on the average frequency.
///
/// The start is the earliest ROCOF tick whose own |ROCOF| exceeds the threshold
/// and whose following confirmation window has at least the majority fraction
/// of ticks above it. Returns `Ok(None)` when no window qualifies.
pub fn detect_event_start(
    avg: &FrequencyTrace,
    params: &DetectionParams,
) -> Result<Option<EventDetection>> {
    params.validate()?;
    let Some(last) = avg.samples.last() else {
        return Ok(None);
    };
    if last.t - avg.samples[0].t < params.confirm_window {
        return Err(Error::InvalidArgument(format!(
            "average trace spans {:.3} s, shorter than the {} s confirmation window",
            last.t - avg.samples[0].t,
            params.confirm_window
        )));
    }
    let r = rocof(avg)?;
    let rs = &r.samples;
    let slack = avg.interval * 0.5;
    let active = |s: &Sample| s.f.abs() > params.rocof_threshold;

    for (i, start) in rs.iter().enumerate() {
        if !active(start) {
            continue;
        }
        let end = start.t + params.confirm_window;
        if end > last.t + slack {
            break;
        }
        let window: Vec<&Sample> = rs[i..].iter().take_while(|s| s.t < end - slack).collect();
        let hits = window.iter().filter(|s| active(s)).count();
        if (hits as f64) < params.majority_fraction * window.len() as f64 {
            continue;
        }
        let mut values: Vec<f64> = window.iter().map(|s| s.f).collect();
        values.sort_by(f64::total_cmp);
        let median = values[values.len() / 2];
        let direction = if median < 0.0 {
            Direction::Falling
        } else {
            Direction::Rising
        };
        let f_start = avg.value_at(start.t).unwrap_or(start.f);
        let f_t = match direction {
            Direction::Falling => f_start - params.delta_f,
            Direction::Rising => f_start + params.delta_f,
        };
        return Ok(Some(EventDetection {
            t_start: start.t,
            f_start,
            f_t,
            t_r: start.t,
            direction,
        }));
    }
    Ok(None)
}

/// One sensor's threshold crossing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub sensor_id: String,
    /// Absolute crossing time, seconds since the trace epoch.
    pub crossing: f64,
    /// `crossing - t_r`.
    pub relative: f64,
}

/// Relative arrival times of all participating sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalSet {
    pub entries: Vec<Arrival>,
    pub t_r: f64,
    pub f_t: f64,
    pub direction: Direction,
    /// Sensors that never crossed the threshold inside the participation window.
    pub omitted: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    #[serde(rename = "t_R")]
    t_r: f64,
    #[serde(rename = "f_T")]
    f_t: f64,
    direction: Direction,
    omitted: Vec<String>,
}

impl ArrivalSet {
    /// Builds a set from absolute crossing times.
    pub fn from_crossings(
        crossings: impl IntoIterator<Item = (String, f64)>,
        t_r: f64,
        f_t: f64,
        direction: Direction,
    ) -> Self {
        let entries = crossings
            .into_iter()
            .map(|(sensor_id, crossing)| Arrival {
                sensor_id,
                crossing,
                relative: crossing - t_r,
            })
            .collect();
        ArrivalSet {
            entries,
            t_r,
            f_t,
            direction,
            omitted: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sensor_id: &str) -> Option<&Arrival> {
        self.entries.iter().find(|a| a.sensor_id == sensor_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|a| a.sensor_id.as_str())
    }

    /// The same crossings against a different reference time. Absolute
    /// crossing times are untouched.
    pub fn rereferenced(&self, t_r: f64) -> ArrivalSet {
        let mut out = self.clone();
        out.t_r = t_r;
        for a in &mut out.entries {
            a.relative = a.crossing - t_r;
        }
        out
    }

    /// Drops the listed sensors.
    pub fn without(&self, ids: &[String]) -> ArrivalSet {
        let mut out = self.clone();
        out.entries.retain(|a| !ids.contains(&a.sensor_id));
        out
    }

    /// `sensor_id,relative_arrival` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sensor_id,relative_arrival\n");
        for a in &self.entries {
            let _ = writeln!(out, "{},{}", a.sensor_id, a.relative);
        }
        out
    }

    /// JSON sidecar carrying the detection context.
    pub fn sidecar_json(&self) -> String {
        let sidecar = Sidecar {
            t_r: self.t_r,
            f_t: self.f_t,
            direction: self.direction,
            omitted: self.omitted.clone(),
        };
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes")
    }

    /// Inverse of [`ArrivalSet::to_csv`] plus [`ArrivalSet::sidecar_json`].
    pub fn from_csv(csv_text: &str, sidecar_json: &str) -> Result<ArrivalSet> {
        let sidecar: Sidecar = serde_json::from_str(sidecar_json)?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(csv_text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["sensor_id", "relative_arrival"] {
            return Err(Error::parse(
                1,
                "expected header `sensor_id,relative_arrival`",
            ));
        }
        let mut entries: Vec<Arrival> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::parse(0, e.to_string()))?;
            let row = record.position().map_or(0, |p| p.line());
            let relative: f64 = record[1].parse().map_err(|_| {
                Error::parse(row, format!("invalid relative_arrival `{}`", &record[1]))
            })?;
            let sensor_id = record[0].to_string();
            if entries.iter().any(|a| a.sensor_id == sensor_id) {
                return Err(Error::DuplicateSensor(sensor_id));
            }
            entries.push(Arrival {
                sensor_id,
                crossing: sidecar.t_r + relative,
                relative,
            });
        }
        Ok(ArrivalSet {
            entries,
            t_r: sidecar.t_r,
            f_t: sidecar.f_t,
            direction: sidecar.direction,
            omitted: sidecar.omitted,
        })
    }
}

/// Extracts each sensor's crossing of the detection threshold.
///
/// Crossings are searched from one confirmation window before the detected
/// start up to `max_delay` after it. The reference time is the detected start,
/// pulled back to the earliest crossing when a sensor crossed before it, so
/// every relative arrival is non-negative.
pub fn relative_arrival_times(
    traces: &[FrequencyTrace],
    detection: &EventDetection,
    params: &DetectionParams,
) -> Result<ArrivalSet> {
    let from = detection.t_start - params.confirm_window;
    let to = detection.t_r + params.max_delay;
    let mut crossings = Vec::new();
    let mut omitted = Vec::new();
    for trace in traces {
        match crossing_time_within(trace, detection.f_t, detection.direction, from..=to) {
            Some(t) => crossings.push((trace.sensor_id.clone(), t)),
            None => omitted.push(trace.sensor_id.clone()),
        }
    }
    if crossings.len() < 3 {
        return Err(Error::InsufficientSensors {
            have: crossings.len(),
            need: 3,
        });
    }
    let earliest = crossings.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let t_r = detection.t_r.min(earliest);
    let mut set = ArrivalSet::from_crossings(crossings, t_r, detection.f_t, detection.direction);
    set.omitted = omitted;
    Ok(set)
}
