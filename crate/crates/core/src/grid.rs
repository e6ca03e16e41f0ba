//! Regular lon/lat grids of scalar values with an inside-hull mask.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lon_min: f64,
    pub lat_min: f64,
    pub lon_max: f64,
    pub lat_max: f64,
}

impl BBox {
    pub fn new(lon_min: f64, lat_min: f64, lon_max: f64, lat_max: f64) -> Result<Self> {
        let b = BBox {
            lon_min,
            lat_min,
            lon_max,
            lat_max,
        };
        if !(lon_min < lon_max && lat_min < lat_max)
            || ![lon_min, lat_min, lon_max, lat_max]
                .iter()
                .all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "empty or invalid bbox {b:?}"
            )));
        }
        Ok(b)
    }

    /// Smallest box holding every point.
    pub fn around(points: impl IntoIterator<Item = [f64; 2]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox {
            lon_min: first[0],
            lat_min: first[1],
            lon_max: first[0],
            lat_max: first[1],
        };
        for p in it {
            b.lon_min = b.lon_min.min(p[0]);
            b.lat_min = b.lat_min.min(p[1]);
            b.lon_max = b.lon_max.max(p[0]);
            b.lat_max = b.lat_max.max(p[1]);
        }
        Some(b)
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            lon_min: self.lon_min.max(other.lon_min),
            lat_min: self.lat_min.max(other.lat_min),
            lon_max: self.lon_max.min(other.lon_max),
            lat_max: self.lat_max.min(other.lat_max),
        };
        (b.lon_min < b.lon_max && b.lat_min < b.lat_max).then_some(b)
    }
}

/// Cell-centered grid. Cell `(i, j)` (row `i` along latitude, column `j` along
/// longitude) has its center at `(lon0 + (j + 0.5) d_lon, lat0 + (i + 0.5) d_lat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub lon0: f64,
    pub lat0: f64,
    pub d_lon: f64,
    pub d_lat: f64,
    pub n_lon: usize,
    pub n_lat: usize,
    /// Row-major, `n_lat * n_lon`. Masked cells hold NaN.
    pub values: Vec<f64>,
    /// `true` where the cell carries a value.
    pub mask: Vec<bool>,
}

impl ScalarGrid {
    /// Geometry covering `bbox` with square cells of `resolution` degrees; all
    /// cells start masked.
    pub fn covering(bbox: &BBox, resolution: f64) -> Result<ScalarGrid> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        let n_lon = (((bbox.lon_max - bbox.lon_min) / resolution).ceil() as usize).max(1);
        let n_lat = (((bbox.lat_max - bbox.lat_min) / resolution).ceil() as usize).max(1);
        Ok(ScalarGrid::empty(
            bbox.lon_min,
            bbox.lat_min,
            resolution,
            resolution,
            n_lon,
            n_lat,
        ))
    }

    pub fn empty(
        lon0: f64,
        lat0: f64,
        d_lon: f64,
        d_lat: f64,
        n_lon: usize,
        n_lat: usize,
    ) -> ScalarGrid {
        ScalarGrid {
            lon0,
            lat0,
            d_lon,
            d_lat,
            n_lon,
            n_lat,
            values: vec![f64::NAN; n_lon * n_lat],
            mask: vec![false; n_lon * n_lat],
        }
    }

    /// Same geometry, every cell masked.
    pub fn like(&self) -> ScalarGrid {
        ScalarGrid::empty(
            self.lon0, self.lat0, self.d_lon, self.d_lat, self.n_lon, self.n_lat,
        )
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_lon + j
    }

    pub fn lon(&self, j: usize) -> f64 {
        self.lon0 + (j as f64 + 0.5) * self.d_lon
    }

    pub fn lat(&self, i: usize) -> f64 {
        self.lat0 + (i as f64 + 0.5) * self.d_lat
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.index(i, j);
        self.mask[k].then(|| self.values[k])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.values[k] = v;
        self.mask[k] = true;
    }

    pub fn unmasked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Unmasked cells as `(i, j, lon, lat, value)`, row by row.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64, f64, f64)> + '_ {
        (0..self.n_lat).flat_map(move |i| {
            (0..self.n_lon)
                .filter_map(move |j| self.get(i, j).map(|v| (i, j, self.lon(j), self.lat(i), v)))
        })
    }

    /// Applies `f` to every unmasked value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarGrid {
        let mut out = self.clone();
        for (v, m) in out.values.iter_mut().zip(&out.mask) {
            if *m {
                *v = f(*v);
            }
        }
        out
    }

    /// CSV with header `lon,lat,<value_name>`; masked cells are omitted.
    pub fn to_csv(&self, value_name: &str) -> String {
        let mut out = String::with_capacity(64 + self.unmasked_count() * 40);
        out.push_str("# crs=lonlat-degrees\n");
        let _ = writeln!(out, "lon,lat,{value_name}");
        for (_, _, lon, lat, v) in self.cells() {
            let _ = writeln!(out, "{lon},{lat},{v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_counts_cells() {
        let b = BBox::new(-100.0, 30.0, -99.0, 30.5).unwrap();
        let g = ScalarGrid::covering(&b, 0.1).unwrap();
        assert_eq!((g.n_lon, g.n_lat), (10, 5));
        assert!((g.lon(0) - -99.95).abs() < 1e-12);
        assert!((g.lat(4) - 30.45).abs() < 1e-12);
        assert_eq!(g.unmasked_count(), 0);
    }

    #[test]
    fn csv_omits_masked_cells() {
        let mut g = ScalarGrid::empty(0.0, 0.0, 1.0, 1.0, 2, 2);
        g.set(0, 1, 3.5);
        let csv = g.to_csv("value");
        assert_eq!(csv, "# crs=lonlat-degrees\nlon,lat,value\n1.5,0.5,3.5\n");
    }

    #[test]
    fn invalid_boxes() {
        assert!(BBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        let a = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = BBox::new(2.0, 2.0, 3.0, 3.0).unwrap();
        assert!(a.intersect(&b).is_none());
    }
}
