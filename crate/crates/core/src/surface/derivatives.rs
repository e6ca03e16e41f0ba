//! Estimation of first and second partial derivatives at mesh nodes.
//!
//! Each node gets a weighted least-squares polynomial through its own value,
//! fitted to the nodes within two edges of it in the mesh. A cubic is used
//! whenever the neighborhood supports it, so data sampled from any polynomial
//! of total degree three yields exact derivatives; sparser neighborhoods fall
//! back to quadratic and then linear fits.

use nalgebra::{DMatrix, DVector};

use super::quintic::NodeJet;
use crate::mesh::{Point, TriMesh};

/// Fewest neighbors used for a fit before widening to nearest nodes.
const MIN_NEIGHBORS: usize = 14;

/// Relative singular-value cutoff below which a fit is considered rank-deficient.
const RANK_TOL: f64 = 1e-9;

/// Basis sizes (constant term excluded) of the cubic, quadratic and linear fits.
const BASIS_LENS: [usize; 3] = [9, 5, 2];

/// Jets `[z, z_x, z_y, z_xx, z_xy, z_yy]` for every node.
pub fn estimate_jets(mesh: &TriMesh, values: &[f64]) -> Vec<NodeJet> {
    let points = mesh.points();
    let adjacency = mesh.vertex_neighbors();
    (0..points.len())
        .map(|i| {
            let neighbors = neighborhood(i, points, &adjacency);
            fit_jet(
                points[i],
                values[i],
                neighbors.iter().map(|&j| (points[j], values[j])),
            )
        })
        .collect()
}

/// Ring-1 and ring-2 neighbors of `i`, topped up with the nearest remaining
/// nodes when the rings are small (hull corners, tiny meshes).
fn neighborhood(i: usize, points: &[Point], adjacency: &[Vec<usize>]) -> Vec<usize> {
    let mut set: Vec<usize> = adjacency[i].clone();
    for &j in &adjacency[i] {
        set.extend(adjacency[j].iter().copied());
    }
    set.sort_unstable();
    set.dedup();
    set.retain(|&j| j != i);

    if set.len() < MIN_NEIGHBORS && set.len() + 1 < points.len() {
        let mut rest: Vec<usize> = (0..points.len())
            .filter(|&j| j != i && set.binary_search(&j).is_err())
            .collect();
        let d2 = |j: usize| {
            let (dx, dy) = (points[j][0] - points[i][0], points[j][1] - points[i][1]);
            dx * dx + dy * dy
        };
        rest.sort_by(|&a, &b| d2(a).total_cmp(&d2(b)).then(a.cmp(&b)));
        let need = MIN_NEIGHBORS - set.len();
        set.extend(rest.into_iter().take(need));
        set.sort_unstable();
    }
    set
}

fn basis(x: f64, y: f64, len: usize) -> [f64; 9] {
    let all = [
        x,
        y,
        x * x,
        x * y,
        y * y,
        x * x * x,
        x * x * y,
        x * y * y,
        y * y * y,
    ];
    let mut out = [0.0; 9];
    out[..len].copy_from_slice(&all[..len]);
    out
}

/// Fits `z - z0` as a polynomial without constant term in scaled offsets.
pub fn fit_jet(center: Point, z0: f64, neighbors: impl Iterator<Item = (Point, f64)>) -> NodeJet {
    let samples: Vec<(f64, f64, f64)> = neighbors
        .map(|(p, z)| (p[0] - center[0], p[1] - center[1], z - z0))
        .collect();
    let scale = samples
        .iter()
        .map(|(dx, dy, _)| dx.hypot(*dy))
        .fold(0.0, f64::max);
    if samples.is_empty() || scale == 0.0 {
        return [z0, 0.0, 0.0, 0.0, 0.0, 0.0];
    }

    for len in BASIS_LENS {
        if samples.len() < len {
            continue;
        }
        let rows = samples.len();
        let mut a = DMatrix::zeros(rows, len);
        let mut b = DVector::zeros(rows);
        for (r, &(dx, dy, dz)) in samples.iter().enumerate() {
            let (x, y) = (dx / scale, dy / scale);
            // Inverse-square distance weights, applied as sqrt on each row.
            let w = 1.0 / (x * x + y * y).sqrt();
            let phi = basis(x, y, len);
            for c in 0..len {
                a[(r, c)] = w * phi[c];
            }
            b[r] = w * dz;
        }
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smax > 0.0) || smin < RANK_TOL * smax {
            continue;
        }
        let Ok(coef) = svd.solve(&b, 0.0) else {
            continue;
        };
        let c = |k: usize| if k < len { coef[k] } else { 0.0 };
        let s2 = scale * scale;
        return [
            z0,
            c(0) / scale,
            c(1) / scale,
            2.0 * c(2) / s2,
            c(3) / s2,
            2.0 * c(4) / s2,
        ];
    }
    [z0, 0.0, 0.0, 0.0, 0.0, 0.0]
}
