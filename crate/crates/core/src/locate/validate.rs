//! Distance-proportional delay model and residual-based outlier flagging.

use serde::{Deserialize, Serialize};

use super::geo::great_circle_distance;
use crate::detect::ArrivalSet;
use crate::error::{Error, Result};
use crate::measurements::SensorSet;

/// Fewest sensors for which the regression and quartiles are meaningful.
pub const MIN_VALIDATION_SENSORS: usize = 4;

/// One sensor's contribution to the delay regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorResidual {
    pub sensor_id: String,
    pub distance_mi: f64,
    /// Measured propagation delay from the estimated event time, seconds.
    pub delay_s: f64,
    /// Delay predicted by the regression.
    pub predicted_s: f64,
    /// `delay_s - predicted_s`.
    pub residual_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Delay per mile, s/mile.
    pub slope: f64,
    /// Only fitted when the diagnostic intercept is enabled; zero otherwise.
    pub intercept: f64,
    pub residuals: Vec<SensorResidual>,
    pub delta_t_threshold: f64,
    pub outliers: Vec<String>,
    /// Set when validation could not run; every other field is then empty.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Lower bound on the outlier threshold, seconds.
    pub min_delta_t: f64,
    pub fit_intercept: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            min_delta_t: 0.25,
            fit_intercept: false,
        }
    }
}

impl ValidationReport {
    fn skipped(reason: String) -> Self {
        ValidationReport {
            slope: f64::NAN,
            intercept: 0.0,
            residuals: Vec::new(),
            delta_t_threshold: f64::NAN,
            outliers: Vec::new(),
            skipped: Some(reason),
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped.is_some()
    }
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Interquartile range of unsorted data.
pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.75) - quantile(&v, 0.25)
}

/// Least-squares `y = a + b x`, or `y = b x` when `intercept` is false.
pub fn linear_fit(x: &[f64], y: &[f64], intercept: bool) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if intercept {
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        (sxx > 0.0).then(|| (my - sxy / sxx * mx, sxy / sxx))
    } else {
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (sxx > 0.0).then(|| (0.0, sxy / sxx))
    }
}

/// Regresses each sensor's delay after `t_event` on its distance from the
/// estimated event and flags sensors whose residual exceeds 1.5 IQR.
pub fn validate(
    arrivals: &ArrivalSet,
    sites: &SensorSet,
    event: [f64; 2],
    t_event: f64,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    if arrivals.len() < MIN_VALIDATION_SENSORS {
        return Ok(ValidationReport::skipped(format!(
            "validation needs at least {MIN_VALIDATION_SENSORS} sensors, have {}",
            arrivals.len()
        )));
    }
    let mut dist = Vec::with_capacity(arrivals.len());
    let mut delay = Vec::with_capacity(arrivals.len());
    for a in &arrivals.entries {
        let site = sites
            .get(&a.sensor_id)
            .ok_or_else(|| Error::UnknownSensor(a.sensor_id.clone()))?;
        dist.push(great_circle_distance([site.lon, site.lat], event));
        delay.push(a.crossing - t_event);
    }
    let Some((intercept, slope)) = linear_fit(&dist, &delay, opts.fit_intercept) else {
        return Ok(ValidationReport::skipped(
            "all sensors coincide with the event location".into(),
        ));
    };
    let residuals: Vec<SensorResidual> = arrivals
        .entries
        .iter()
        .zip(dist.iter().zip(&delay))
        .map(|(a, (&d, &dt))| {
            let predicted = intercept + slope * d;
            SensorResidual {
                sensor_id: a.sensor_id.clone(),
                distance_mi: d,
                delay_s: dt,
                predicted_s: predicted,
                residual_s: dt - predicted,
            }
        })
        .collect();
    let r: Vec<f64> = residuals.iter().map(|s| s.residual_s).collect();
    let delta_t = (1.5 * iqr(&r)).max(opts.min_delta_t);
    let outliers = residuals
        .iter()
        .filter(|s| s.residual_s.abs() > delta_t)
        .map(|s| s.sensor_id.clone())
        .collect();
    Ok(ValidationReport {
        slope,
        intercept,
        residuals,
        delta_t_threshold: delta_t,
        outliers,
        skipped: None,
    })
}
