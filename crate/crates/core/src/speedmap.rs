//! Propagation speed from the gradient of a gridded arrival-time surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;

/// Default lower bound on the composite gradient, s/mile.
pub const DEFAULT_GRADIENT_FLOOR: f64 = 1e-4;

/// Miles per degree along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitDistances {
    pub lat_mi_per_deg: f64,
    /// Scaled by `cos(lat)` to give miles per degree of longitude.
    pub lon_mi_per_deg_equator: f64,
}

impl Default for UnitDistances {
    fn default() -> Self {
        UnitDistances {
            lat_mi_per_deg: 69.055,
            lon_mi_per_deg_equator: 69.172,
        }
    }
}

impl UnitDistances {
    pub fn lat(&self) -> f64 {
        self.lat_mi_per_deg
    }

    pub fn lon(&self, lat_deg: f64) -> f64 {
        self.lon_mi_per_deg_equator * lat_deg.to_radians().cos()
    }
}

/// Speeds in miles/s; cells whose gradient fell below the floor are recorded in
/// `singular` and carry no speed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    pub speeds: ScalarGrid,
    pub singular: Vec<bool>,
}

impl SpeedField {
    pub fn singular_count(&self) -> usize {
        self.singular.iter().filter(|s| **s).count()
    }

    /// CSV `lon,lat,speed_mi_per_s`; singular and masked cells are omitted.
    pub fn to_csv(&self) -> String {
        self.speeds.to_csv("speed_mi_per_s")
    }
}

/// Per-degree gradients `(dT/dlon, dT/dlat)`: central differences where both
/// neighbors are unmasked, one-sided where only one is.
pub fn grid_gradient(grid: &ScalarGrid) -> Result<(ScalarGrid, ScalarGrid)> {
    let mut g_lon = grid.like();
    let mut g_lat = grid.like();
    let (n_lat, n_lon) = (grid.n_lat, grid.n_lon);
    let diff = |c: Option<f64>, lo: Option<f64>, hi: Option<f64>, h: f64| match (lo, hi) {
        (Some(a), Some(b)) => Some((b - a) / (2.0 * h)),
        (Some(a), None) => c.map(|c| (c - a) / h),
        (None, Some(b)) => c.map(|c| (b - c) / h),
        (None, None) => None,
    };
    for i in 0..n_lat {
        for j in 0..n_lon {
            let c = grid.get(i, j);
            if c.is_none() {
                continue;
            }
            let west = (j > 0).then(|| grid.get(i, j - 1)).flatten();
            let east = (j + 1 < n_lon).then(|| grid.get(i, j + 1)).flatten();
            let south = (i > 0).then(|| grid.get(i - 1, j)).flatten();
            let north = (i + 1 < n_lat).then(|| grid.get(i + 1, j)).flatten();
            if let Some(v) = diff(c, west, east, grid.d_lon) {
                g_lon.set(i, j, v);
            }
            if let Some(v) = diff(c, south, north, grid.d_lat) {
                g_lat.set(i, j, v);
            }
        }
    }
    let any = g_lon.mask.iter().chain(&g_lat.mask).any(|m| *m);
    if !any {
        return Err(Error::Numerical("no cell has a computable gradient".into()));
    }
    Ok((g_lon, g_lat))
}

/// Converts per-degree gradients to per-mile gradients at each cell's latitude.
pub fn rescale_gradient(
    g_lon: &ScalarGrid,
    g_lat: &ScalarGrid,
    unit: &UnitDistances,
) -> (ScalarGrid, ScalarGrid) {
    let mut d_lon = g_lon.like();
    let mut d_lat = g_lat.like();
    for (i, j, _, lat, v) in g_lon.cells() {
        d_lon.set(i, j, v / unit.lon(lat));
    }
    for (i, j, _, _, v) in g_lat.cells() {
        d_lat.set(i, j, v / unit.lat());
    }
    (d_lon, d_lat)
}

/// Cellwise Euclidean norm; masked wherever either input is.
pub fn composite_gradient(g_dlon: &ScalarGrid, g_dlat: &ScalarGrid) -> ScalarGrid {
    let mut out = g_dlon.like();
    for (i, j, _, _, a) in g_dlon.cells() {
        if let Some(b) = g_dlat.get(i, j) {
            out.set(i, j, a.hypot(b));
        }
    }
    out
}

/// `v = 1/g` where `g >= floor`; cells below the floor become singular.
pub fn invert_to_speed(composite: &ScalarGrid, floor: f64) -> Result<SpeedField> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gradient floor must be positive, got {floor}"
        )));
    }
    let mut speeds = composite.like();
    let mut singular = vec![false; composite.values.len()];
    for (i, j, _, _, g) in composite.cells() {
        if g >= floor {
            speeds.set(i, j, 1.0 / g);
        } else {
            singular[composite.index(i, j)] = true;
        }
    }
    Ok(SpeedField { speeds, singular })
}

/// The whole chain from arrival-time grid (seconds) to speed field.
pub fn speed_field(grid: &ScalarGrid, unit: &UnitDistances, floor: f64) -> Result<SpeedField> {
    let (g_lon, g_lat) = grid_gradient(grid)?;
    let (d_lon, d_lat) = rescale_gradient(&g_lon, &g_lat, unit);
    invert_to_speed(&composite_gradient(&d_lon, &d_lat), floor)
}

/// Cells whose whole `(2 depth + 1)^2` neighborhood is unmasked.
pub fn interior_mask(grid: &ScalarGrid, depth: usize) -> Vec<bool> {
    let mut out = vec![false; grid.mask.len()];
    for i in depth..grid.n_lat.saturating_sub(depth) {
        for j in depth..grid.n_lon.saturating_sub(depth) {
            out[grid.index(i, j)] = (i - depth..=i + depth)
                .all(|a| (j - depth..=j + depth).all(|b| grid.mask[grid.index(a, b)]));
        }
    }
    out
}
