//! Run configuration: a flat `key = value` file plus `--set key=value` overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use emloc::locate::LocateConfig;
use emloc::speedmap::{UnitDistances, DEFAULT_GRADIENT_FLOOR};
use emloc::{BBox, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub locate: LocateConfig,
    pub gradient_floor: f64,
    pub unit: UnitDistances,
    /// Traces with fewer samples are dropped on load.
    pub min_samples: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            locate: LocateConfig::default(),
            gradient_floor: DEFAULT_GRADIENT_FLOOR,
            unit: UnitDistances::default(),
            min_samples: 2,
            output_dir: PathBuf::from("emloc-out"),
        }
    }
}

const KEYS: &[&str] = &[
    "filter_n",
    "delta_f",
    "rocof_threshold",
    "majority_fraction",
    "confirm_window",
    "max_delay",
    "bbox",
    "resolution",
    "max_iterations",
    "min_delta_t",
    "fit_intercept",
    "refine",
    "gradient_floor",
    "lat_mi_per_deg",
    "lon_mi_per_deg_equator",
    "min_samples",
    "output_dir",
];

fn bad(row: u64, key: &str, value: &str, what: &str) -> Error {
    Error::Parse {
        row,
        message: format!("`{key}`: {what}, got `{value}`"),
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            cfg.apply_text(&text)?;
        }
        for (k, o) in overrides.iter().enumerate() {
            let (key, value) = o.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("--set expects key=value, got `{o}`"))
            })?;
            cfg.set(key.trim(), value.trim(), k as u64 + 1)
                .map_err(|e| Error::InvalidArgument(format!("--set {o}: {e}")))?;
        }
        cfg.locate.detection.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let row = lineno as u64 + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                row,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim(), row)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, row: u64) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(row, key, value, "expected a number"))
        };
        let positive = || -> Result<f64> {
            num().and_then(|v| {
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(bad(row, key, value, "expected a positive number"))
                }
            })
        };
        let int = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| bad(row, key, value, "expected a non-negative integer"))
        };
        let boolean = || -> Result<bool> {
            match value {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(bad(row, key, value, "expected true or false")),
            }
        };
        let l = &mut self.locate;
        match key {
            "filter_n" => {
                let n = int()?;
                if n == 0 || n % 2 == 0 {
                    return Err(bad(row, key, value, "expected an odd positive integer"));
                }
                l.filter_window = n;
            }
            "delta_f" => l.detection.delta_f = positive()?,
            "rocof_threshold" => l.detection.rocof_threshold = positive()?,
            "majority_fraction" => l.detection.majority_fraction = positive()?,
            "confirm_window" => l.detection.confirm_window = positive()?,
            "max_delay" => l.detection.max_delay = positive()?,
            "bbox" => {
                l.bbox = if value.is_empty() || value == "auto" {
                    None
                } else {
                    let v: Vec<f64> = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(row, key, value, "expected lon_min,lat_min,lon_max,lat_max"))?;
                    if v.len() != 4 {
                        return Err(bad(row, key, value, "expected lon_min,lat_min,lon_max,lat_max"));
                    }
                    Some(BBox::new(v[0], v[1], v[2], v[3])?)
                }
            }
            "resolution" => l.resolution = positive()?,
            "max_iterations" => l.max_iterations = int()?,
            "min_delta_t" => {
                let v = num()?;
                if v < 0.0 {
                    return Err(bad(row, key, value, "expected a non-negative number"));
                }
                l.validation.min_delta_t = v;
            }
            "fit_intercept" => l.validation.fit_intercept = boolean()?,
            "refine" => l.refine = boolean()?,
            "gradient_floor" => self.gradient_floor = positive()?,
            "lat_mi_per_deg" => self.unit.lat_mi_per_deg = positive()?,
            "lon_mi_per_deg_equator" => self.unit.lon_mi_per_deg_equator = positive()?,
            "min_samples" => self.min_samples = int()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => {
                return Err(Error::Parse {
                    row,
                    message: format!("unknown config key `{key}` (known: {})", KEYS.join(", ")),
                })
            }
        }
        Ok(())
    }

    /// Every key with its current value, in the format read by `apply_text`.
    pub fn to_text(&self) -> String {
        let l = &self.locate;
        let d = &l.detection;
        let bbox = l.bbox.as_ref().map_or("auto".to_string(), |b| {
            format!("{},{},{},{}", b.lon_min, b.lat_min, b.lon_max, b.lat_max)
        });
        let mut out = String::new();
        let rows: [(&str, String); 17] = [
            ("filter_n", l.filter_window.to_string()),
            ("delta_f", d.delta_f.to_string()),
            ("rocof_threshold", d.rocof_threshold.to_string()),
            ("majority_fraction", d.majority_fraction.to_string()),
            ("confirm_window", d.confirm_window.to_string()),
            ("max_delay", d.max_delay.to_string()),
            ("bbox", bbox),
            ("resolution", l.resolution.to_string()),
            ("max_iterations", l.max_iterations.to_string()),
            ("min_delta_t", l.validation.min_delta_t.to_string()),
            ("fit_intercept", l.validation.fit_intercept.to_string()),
            ("refine", l.refine.to_string()),
            ("gradient_floor", self.gradient_floor.to_string()),
            ("lat_mi_per_deg", self.unit.lat_mi_per_deg.to_string()),
            ("lon_mi_per_deg_equator", self.unit.lon_mi_per_deg_equator.to_string()),
            ("min_samples", self.min_samples.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
