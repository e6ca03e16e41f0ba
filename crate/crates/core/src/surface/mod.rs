//! C1 arrival-time surface over a Delaunay mesh.
//!
//! Every triangle carries a bivariate quintic (21 coefficients) built from the
//! value and estimated first and second derivatives at its vertices. The
//! scheme reproduces any polynomial of total degree three exactly and joins
//! neighboring patches with continuous value and gradient.

mod derivatives;
mod quintic;

pub use derivatives::{estimate_jets, fit_jet};
pub use quintic::{coeff_index, NodeJet, QuinticPatch, NUM_COEFFS};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{BBox, ScalarGrid};
use crate::mesh::{orient2d, Location, Point, TriMesh};

/// Fitted surface `T(lon, lat)`; immutable once built.
#[derive(Debug, Clone)]
pub struct ArrivalSurface {
    mesh: TriMesh,
    jets: Vec<NodeJet>,
    patches: Vec<QuinticPatch>,
}

/// Fits the surface through `values[i]` at mesh point `i`.
pub fn fit_surface(mesh: TriMesh, values: &[f64]) -> Result<ArrivalSurface> {
    if values.len() != mesh.num_points() {
        return Err(Error::SizeMismatch(format!(
            "{} values for {} mesh sites",
            values.len(),
            mesh.num_points()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite value at site {i}"
        )));
    }
    let jets = estimate_jets(&mesh, values);
    ArrivalSurface::from_jets(mesh, jets)
}

impl ArrivalSurface {
    /// Builds the patches from caller-supplied node jets.
    pub fn from_jets(mesh: TriMesh, jets: Vec<NodeJet>) -> Result<ArrivalSurface> {
        if jets.len() != mesh.num_points() {
            return Err(Error::SizeMismatch(format!(
                "{} jets for {} mesh sites",
                jets.len(),
                mesh.num_points()
            )));
        }
        let patches = (0..mesh.num_triangles())
            .map(|t| {
                let verts = mesh.triangles()[t];
                QuinticPatch::new(mesh.triangle_points(t), verts.map(|v| jets[v]))
                    .ok_or(Error::DegenerateTriangle(t))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ArrivalSurface {
            mesh,
            jets,
            patches,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn node_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.jets.iter().map(|j| j[0])
    }

    /// Value and estimated derivatives at each node.
    pub fn jets(&self) -> &[NodeJet] {
        &self.jets
    }

    pub fn patches(&self) -> &[QuinticPatch] {
        &self.patches
    }

    /// Surface value at `(lon, lat)`.
    pub fn eval(&self, lon: f64, lat: f64) -> Result<f64> {
        let mut hint = 0;
        self.eval_with_hint(lon, lat, &mut hint)
    }

    /// As [`ArrivalSurface::eval`], walking from `hint` and leaving the
    /// containing triangle in it for the next call.
    pub fn eval_with_hint(&self, lon: f64, lat: f64, hint: &mut usize) -> Result<f64> {
        match self.mesh.locate([lon, lat], *hint) {
            Location::Inside(t) => {
                *hint = t;
                Ok(self.patches[t].eval([lon, lat]))
            }
            Location::Outside => Err(Error::OutOfDomain { lon, lat }),
        }
    }

    /// Value of triangle `t`'s polynomial at `p`, wherever `p` is.
    pub fn eval_patch(&self, t: usize, p: Point) -> f64 {
        self.patches[t].eval(p)
    }

    /// Analytic gradient `(dT/dlon, dT/dlat)`.
    pub fn gradient(&self, lon: f64, lat: f64) -> Result<[f64; 2]> {
        match self.mesh.locate([lon, lat], 0) {
            Location::Inside(t) => Ok(self.patches[t].gradient([lon, lat])),
            Location::Outside => Err(Error::OutOfDomain { lon, lat }),
        }
    }

    /// Evaluates cell centers of a grid over `bbox`. Cells outside the hull
    /// stay masked.
    pub fn eval_grid(&self, bbox: &BBox, resolution: f64) -> Result<ScalarGrid> {
        let hull_box = BBox::around(self.mesh.points().iter().copied()).expect("mesh has points");
        let mut grid = ScalarGrid::covering(bbox, resolution)?;
        if bbox.intersect(&hull_box).is_none() {
            return Err(Error::EmptyGrid);
        }
        self.fill_grid(&mut grid);
        if grid.unmasked_count() == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(grid)
    }

    /// Fills every cell of `grid` whose center is inside the hull.
    pub fn fill_grid(&self, grid: &mut ScalarGrid) {
        let spans: Vec<(f64, f64)> = (0..self.mesh.num_triangles())
            .map(|t| {
                let [a, b, c] = self.mesh.triangle_points(t);
                (a[1].min(b[1]).min(c[1]), a[1].max(b[1]).max(c[1]))
            })
            .collect();
        let n_lon = grid.n_lon;
        let geometry = grid.like();
        let fill_row = |i: usize, row: &mut [f64], mask: &mut [bool]| {
            let lat = geometry.lat(i);
            for (t, &(lo, hi)) in spans.iter().enumerate() {
                if lat < lo || lat > hi {
                    continue;
                }
                let [a, b, c] = self.mesh.triangle_points(t);
                let (xmin, xmax) = (a[0].min(b[0]).min(c[0]), a[0].max(b[0]).max(c[0]));
                let j0 = ((xmin - geometry.lon0) / geometry.d_lon - 0.5)
                    .floor()
                    .max(0.0) as usize;
                let j1 = (((xmax - geometry.lon0) / geometry.d_lon - 0.5)
                    .ceil()
                    .max(0.0) as usize)
                    .min(n_lon.saturating_sub(1));
                for j in j0..=j1 {
                    if mask[j] {
                        continue;
                    }
                    let p = [geometry.lon(j), lat];
                    if orient2d(a, b, p) >= 0.0
                        && orient2d(b, c, p) >= 0.0
                        && orient2d(c, a, p) >= 0.0
                    {
                        row[j] = self.patches[t].eval(p);
                        mask[j] = true;
                    }
                }
            }
        };
        if n_lon == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        grid.values
            .par_chunks_mut(n_lon)
            .zip(grid.mask.par_chunks_mut(n_lon))
            .enumerate()
            .for_each(|(i, (row, mask))| fill_row(i, row, mask));
        #[cfg(not(feature = "parallel"))]
        grid.values
            .chunks_mut(n_lon)
            .zip(grid.mask.chunks_mut(n_lon))
            .enumerate()
            .for_each(|(i, (row, mask))| fill_row(i, row, mask));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scattered(n: usize, seed: u64) -> Vec<Point> {
        // Small LCG keeps the test free of RNG plumbing.
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n)
            .map(|_| [-105.0 + 20.0 * next(), 30.0 + 12.0 * next()])
            .collect()
    }

    fn surface_of(points: &[Point], f: impl Fn(f64, f64) -> f64) -> ArrivalSurface {
        let mesh = TriMesh::new(points).unwrap();
        let values: Vec<f64> = points.iter().map(|p| f(p[0], p[1])).collect();
        fit_surface(mesh, &values).unwrap()
    }

    #[test]
    fn constant_is_reproduced() {
        let pts = scattered(30, 1);
        let s = surface_of(&pts, |_, _| 7.0);
        for t in 0..s.mesh().num_triangles() {
            let [a, b, c] = s.mesh().triangle_points(t);
            let g = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            assert!((s.eval(g[0], g[1]).unwrap() - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_field_at_centroids() {
        let pts = scattered(40, 2);
        let f = |x: f64, y: f64| 2.0 + 3.0 * x - y;
        let s = surface_of(&pts, f);
        for t in 0..s.mesh().num_triangles() {
            let [a, b, c] = s.mesh().triangle_points(t);
            let g = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            let v = s.eval(g[0], g[1]).unwrap();
            assert!((v - f(g[0], g[1])).abs() <= 1e-9 * f(g[0], g[1]).abs());
        }
    }

    #[test]
    fn interpolates_nodes() {
        let pts = scattered(50, 3);
        let f = |x: f64, y: f64| ((x + 100.0) * 0.3).sin() + (y * 0.2).cos();
        let s = surface_of(&pts, f);
        for p in &pts {
            assert!((s.eval(p[0], p[1]).unwrap() - f(p[0], p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_is_reproduced() {
        let pts = scattered(60, 9);
        let f = |x: f64, y: f64| x * x * x - 2.0 * x * y * y + y;
        let s = surface_of(&pts, f);
        for t in 0..s.mesh().num_triangles() {
            let [a, b, c] = s.mesh().triangle_points(t);
            for w in [[1.0, 1.0, 1.0], [4.0, 1.0, 1.0], [1.0, 2.0, 5.0]] {
                let n = w[0] + w[1] + w[2];
                let p = [
                    (w[0] * a[0] + w[1] * b[0] + w[2] * c[0]) / n,
                    (w[0] * a[1] + w[1] * b[1] + w[2] * c[1]) / n,
                ];
                let v = s.eval(p[0], p[1]).unwrap();
                let e = f(p[0], p[1]);
                assert!((v - e).abs() <= 1e-6 * e.abs(), "{v} vs {e}");
            }
        }
    }

    #[test]
    fn patches_join_with_continuous_gradient() {
        let pts = scattered(50, 10);
        let s = surface_of(&pts, |x, y| ((x + 100.0) * 0.4).sin() * (y * 0.3).cos());
        let mesh = s.mesh();
        for (t, nbrs) in mesh.neighbors().iter().enumerate() {
            for (k, nb) in nbrs.iter().enumerate() {
                let Some(u) = *nb else { continue };
                let tri = mesh.triangles()[t];
                let (a, b) = (
                    mesh.points()[tri[(k + 1) % 3]],
                    mesh.points()[tri[(k + 2) % 3]],
                );
                for q in [0.1, 0.37, 0.5, 0.81] {
                    let p = [a[0] + q * (b[0] - a[0]), a[1] + q * (b[1] - a[1])];
                    let (v1, v2) = (s.patches()[t].eval(p), s.patches()[u].eval(p));
                    assert!((v1 - v2).abs() < 1e-9, "value jump {}", v1 - v2);
                    let (g1, g2) = (s.patches()[t].gradient(p), s.patches()[u].gradient(p));
                    assert!((g1[0] - g2[0]).abs() < 1e-6 && (g1[1] - g2[1]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn affine_in_values() {
        let pts = scattered(30, 11);
        let mesh = TriMesh::new(&pts).unwrap();
        let z: Vec<f64> = pts
            .iter()
            .map(|p| (p[0] * 0.3).sin() + p[1] * 0.01)
            .collect();
        let z2: Vec<f64> = z.iter().map(|v| 3.0 * v - 2.0).collect();
        let s1 = fit_surface(mesh.clone(), &z).unwrap();
        let s2 = fit_surface(mesh, &z2).unwrap();
        let p = [
            (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0,
            (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0,
        ];
        if let (Ok(a), Ok(b)) = (s1.eval(p[0], p[1]), s2.eval(p[0], p[1])) {
            assert!((3.0 * a - 2.0 - b).abs() < 1e-9);
        }
    }

    #[test]
    fn outside_hull_is_out_of_domain() {
        let pts = scattered(20, 4);
        let s = surface_of(&pts, |x, _| x);
        assert!(matches!(s.eval(0.0, 0.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn value_size_mismatch() {
        let mesh = TriMesh::new(&scattered(10, 5)).unwrap();
        assert!(matches!(
            fit_surface(mesh, &[1.0; 9]),
            Err(Error::SizeMismatch(_))
        ));
    }

    #[test]
    fn grid_over_linear_field() {
        let pts = scattered(40, 6);
        let f = |x: f64, y: f64| 2.0 + 3.0 * x - y;
        let s = surface_of(&pts, f);
        let bbox = BBox::new(-106.0, 29.0, -84.0, 43.0).unwrap();
        let grid = s.eval_grid(&bbox, 0.25).unwrap();
        assert!(grid.unmasked_count() > 100);
        for (_, _, lon, lat, v) in grid.cells() {
            assert!((v - f(lon, lat)).abs() <= 1e-9 * f(lon, lat).abs().max(1.0));
            assert!(s.mesh().contains([lon, lat]));
        }
        // Masked cells are exactly the ones outside the hull.
        for i in 0..grid.n_lat {
            for j in 0..grid.n_lon {
                let inside = s.mesh().contains([grid.lon(j), grid.lat(i)]);
                assert_eq!(grid.get(i, j).is_some(), inside);
            }
        }
    }

    #[test]
    fn halving_resolution_quadruples_cells() {
        let pts = scattered(40, 7);
        let s = surface_of(&pts, |_, _| 1.0);
        let bbox = BBox::new(-106.0, 29.0, -84.0, 43.0).unwrap();
        let coarse = s.eval_grid(&bbox, 0.2).unwrap().unmasked_count() as f64;
        let fine = s.eval_grid(&bbox, 0.1).unwrap().unmasked_count() as f64;
        let ratio = fine / coarse;
        assert!((3.7..4.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn grid_outside_hull_is_an_error() {
        let pts = scattered(20, 8);
        let s = surface_of(&pts, |_, _| 1.0);
        let bbox = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(s.eval_grid(&bbox, 0.1), Err(Error::EmptyGrid)));
    }
}
