//! Delaunay triangulation of sensor sites in the lon/lat plane.
//!
//! Sites are inserted one at a time in input order. A new site either splits
//! the triangle (or edge) containing it or, when outside the current hull, is
//! joined to every hull edge it can see. Lawson flips driven by [`incircle`]
//! then restore the empty-circumcircle property. Cocircular quadrilaterals keep
//! the diagonal whose smaller endpoint index is lowest.

mod predicates;

use std::fmt::Write as _;

pub use predicates::{incircle, orient2d, Point};

use crate::error::{Error, Result};
use crate::measurements::SensorSet;

/// A triangulated site set. Triangles are counter-clockwise; `neighbors[t][i]`
/// is the triangle across the edge opposite vertex `i` of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    neighbors: Vec<[Option<usize>; 3]>,
    hull: Vec<usize>,
}

/// Result of locating a point in the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside(usize),
    Outside,
}

/// Triangulates sensor sites using `(lon, lat)` as planar coordinates.
pub fn delaunay(sites: &SensorSet) -> Result<TriMesh> {
    let points: Vec<Point> = sites.sites().iter().map(|s| [s.lon, s.lat]).collect();
    TriMesh::new(&points)
}

impl TriMesh {
    /// Delaunay triangulation of `points`.
    pub fn new(points: &[Point]) -> Result<TriMesh> {
        if points.len() < 3 {
            return Err(Error::InsufficientSensors {
                have: points.len(),
                need: 3,
            });
        }
        if let Some(p) = points
            .iter()
            .find(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidArgument(format!("non-finite site {p:?}")));
        }
        check_duplicates(points)?;

        let (i0, i1) = (0, 1);
        let i2 = (2..points.len())
            .find(|&k| orient2d(points[i0], points[i1], points[k]) != 0.0)
            .ok_or(Error::Collinear)?;
        let first = if orient2d(points[i0], points[i1], points[i2]) > 0.0 {
            [i0, i1, i2]
        } else {
            [i0, i2, i1]
        };

        let mut mesh = TriMesh {
            points: points.to_vec(),
            triangles: vec![first],
            neighbors: vec![[None; 3]],
            hull: first.to_vec(),
        };
        for k in 2..points.len() {
            if k != i2 {
                mesh.insert(k);
            }
        }
        mesh.canonicalize();
        Ok(mesh)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    /// Hull vertex indices in counter-clockwise order, collinear boundary
    /// vertices included.
    pub fn hull(&self) -> &[usize] {
        &self.hull
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.points[v])
    }

    /// Vertices sharing an edge with `v`, sorted by index.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.points.len()];
        for tri in &self.triangles {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Locates `p` by walking from triangle `hint`. Points on an edge shared by
    /// two triangles resolve to the lower-indexed one.
    pub fn locate(&self, p: Point, hint: usize) -> Location {
        let mut t = hint.min(self.triangles.len() - 1);
        let mut prev = usize::MAX;
        for _ in 0..=self.triangles.len() {
            let tri = self.triangle_points(t);
            let mut exits = [None; 3];
            let mut on_edge = None;
            for i in 0..3 {
                let o = orient2d(tri[(i + 1) % 3], tri[(i + 2) % 3], p);
                if o < 0.0 {
                    // The mesh is convex: crossing a hull edge means outside.
                    match self.neighbors[t][i] {
                        Some(n) => exits[i] = Some(n),
                        None => return Location::Outside,
                    }
                } else if o == 0.0 {
                    on_edge = on_edge.or(self.neighbors[t][i]);
                }
            }
            let mut candidates = exits.iter().flatten().copied();
            let Some(first) = candidates.next() else {
                return match on_edge.filter(|&n| n < t) {
                    Some(n) => Location::Inside(n),
                    None => Location::Inside(t),
                };
            };
            let next = if first == prev {
                candidates.next().unwrap_or(first)
            } else {
                first
            };
            prev = t;
            t = next;
        }
        self.locate_linear(p)
    }

    fn locate_linear(&self, p: Point) -> Location {
        (0..self.triangles.len())
            .find(|&t| {
                let [a, b, c] = self.triangle_points(t);
                orient2d(a, b, p) >= 0.0 && orient2d(b, c, p) >= 0.0 && orient2d(c, a, p) >= 0.0
            })
            .map_or(Location::Outside, Location::Inside)
    }

    /// True when `p` lies in the closed convex hull.
    pub fn contains(&self, p: Point) -> bool {
        let h = &self.hull;
        (0..h.len())
            .all(|i| orient2d(self.points[h[i]], self.points[h[(i + 1) % h.len()]], p) >= 0.0)
    }

    /// Exhaustive empty-circumcircle check: every (triangle, site) pair where
    /// the site is strictly inside the triangle's circumcircle.
    pub fn delaunay_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| self.points[v]);
            for (s, &p) in self.points.iter().enumerate() {
                if !tri.contains(&s) && incircle(a, b, c, p) > 0.0 {
                    out.push((t, s));
                }
            }
        }
        out
    }

    /// Triangles as sorted vertex triples, themselves sorted.
    pub fn canonical_triangles(&self) -> Vec<[usize; 3]> {
        let mut tris: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .map(|t| {
                let mut t = *t;
                t.sort_unstable();
                t
            })
            .collect();
        tris.sort_unstable();
        tris
    }

    /// `tri_index,v0,v1,v2` rows.
    pub fn triangles_csv(&self) -> String {
        let mut out = String::from("tri_index,v0,v1,v2\n");
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", t[0], t[1], t[2]);
        }
        out
    }

    fn insert(&mut self, k: usize) {
        let p = self.points[k];
        match self.locate_linear(p) {
            Location::Inside(t) => {
                let tri = self.triangle_points(t);
                let zero = (0..3).find(|&i| orient2d(tri[(i + 1) % 3], tri[(i + 2) % 3], p) == 0.0);
                match zero {
                    Some(i) => self.split_edge(t, i, k),
                    None => self.split_triangle(t, k),
                }
            }
            Location::Outside => self.extend_hull(k),
        }
    }

    fn push_triangle(&mut self, verts: [usize; 3], nbrs: [Option<usize>; 3]) -> usize {
        self.triangles.push(verts);
        self.neighbors.push(nbrs);
        self.triangles.len() - 1
    }

    fn relink(&mut self, t: Option<usize>, old: usize, new: usize) {
        if let Some(t) = t {
            for n in &mut self.neighbors[t] {
                if *n == Some(old) {
                    *n = Some(new);
                }
            }
        }
    }

    /// Rotates triangle `t` so that local index `i` becomes index 0.
    fn rotate(&mut self, t: usize, i: usize) {
        self.triangles[t].rotate_left(i);
        self.neighbors[t].rotate_left(i);
    }

    fn split_triangle(&mut self, t: usize, p: usize) {
        let [a, b, c] = self.triangles[t];
        let [na, nb, nc] = self.neighbors[t];
        let t1 = self.triangles.len();
        let t2 = t1 + 1;
        self.triangles[t] = [p, a, b];
        self.neighbors[t] = [nc, Some(t1), Some(t2)];
        self.push_triangle([p, b, c], [na, Some(t2), Some(t)]);
        self.push_triangle([p, c, a], [nb, Some(t), Some(t1)]);
        self.relink(na, t, t1);
        self.relink(nb, t, t2);
        self.legalize_all(&[t, t1, t2]);
    }

    /// Splits the edge opposite local vertex `i` of `t` at site `p`.
    fn split_edge(&mut self, t: usize, i: usize, p: usize) {
        self.rotate(t, i);
        let [c, a, b] = self.triangles[t];
        let [u, nb, na] = self.neighbors[t];
        let t1 = self.triangles.len();
        match u {
            Some(u) => {
                let j = self.neighbors[u]
                    .iter()
                    .position(|&n| n == Some(t))
                    .unwrap();
                self.rotate(u, j);
                let [d, _, _] = self.triangles[u];
                let [_, mb, ma] = self.neighbors[u];
                let u1 = t1 + 1;
                self.triangles[t] = [c, a, p];
                self.neighbors[t] = [Some(u1), Some(t1), na];
                self.push_triangle([c, p, b], [Some(u), nb, Some(t)]);
                self.triangles[u] = [d, b, p];
                self.neighbors[u] = [Some(t1), Some(u1), ma];
                self.push_triangle([d, p, a], [Some(t), mb, Some(u)]);
                self.relink(nb, t, t1);
                self.relink(mb, u, u1);
                for tri in [t, t1, u, u1] {
                    self.rotate_to(tri, p);
                }
                self.legalize_all(&[t, t1, u, u1]);
            }
            None => {
                self.triangles[t] = [c, a, p];
                self.neighbors[t] = [None, Some(t1), na];
                self.push_triangle([c, p, b], [None, nb, Some(t)]);
                self.relink(nb, t, t1);
                let pos = self.hull.iter().position(|&v| v == a).unwrap();
                self.hull.insert(pos + 1, p);
                self.rotate_to(t, p);
                self.rotate_to(t1, p);
                self.legalize_all(&[t, t1]);
            }
        }
    }

    fn rotate_to(&mut self, t: usize, v: usize) {
        let i = self.triangles[t].iter().position(|&x| x == v).unwrap();
        self.rotate(t, i);
    }

    /// Joins an outside site to every hull edge it sees.
    fn extend_hull(&mut self, p: usize) {
        let pt = self.points[p];
        let m = self.hull.len();
        let visible: Vec<bool> = (0..m)
            .map(|i| {
                let (a, b) = (self.hull[i], self.hull[(i + 1) % m]);
                orient2d(self.points[a], self.points[b], pt) < 0.0
            })
            .collect();
        let start = (0..m)
            .find(|&i| visible[i] && !visible[(i + m - 1) % m])
            .expect("an outside point sees a contiguous hull chain");
        let chain: Vec<usize> = (0..m)
            .map(|k| (start + k) % m)
            .take_while(|&i| visible[i])
            .collect();

        let mut created = Vec::with_capacity(chain.len());
        for &i in &chain {
            let (a, b) = (self.hull[i], self.hull[(i + 1) % m]);
            let (outer, slot) = self.boundary_triangle(a, b);
            let prev = created.last().copied();
            let t = self.push_triangle([p, b, a], [Some(outer), prev, None]);
            self.neighbors[outer][slot] = Some(t);
            if let Some(prev) = prev {
                self.neighbors[prev][2] = Some(t);
            }
            created.push(t);
        }

        let first = chain[0];
        let last_vertex = (chain[chain.len() - 1] + 1) % m;
        let mut hull = Vec::with_capacity(m + 1);
        let mut i = last_vertex;
        loop {
            hull.push(self.hull[i]);
            if i == first {
                break;
            }
            i = (i + 1) % m;
        }
        hull.push(p);
        self.hull = hull;

        self.legalize_all(&created);
    }

    /// Triangle holding the directed boundary edge `a -> b`, and the local
    /// index of its vertex opposite that edge.
    fn boundary_triangle(&self, a: usize, b: usize) -> (usize, usize) {
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                if tri[(i + 1) % 3] == a && tri[(i + 2) % 3] == b && self.neighbors[t][i].is_none()
                {
                    return (t, i);
                }
            }
        }
        unreachable!("hull edge {a}->{b} has no boundary triangle")
    }

    /// Legalizes the edge opposite local vertex 0 of each listed triangle.
    fn legalize_all(&mut self, tris: &[usize]) {
        let mut stack: Vec<usize> = tris.to_vec();
        let mut budget = 64 * self.points.len() * self.points.len() + 1024;
        while let Some(t) = stack.pop() {
            budget -= 1;
            if budget == 0 {
                break;
            }
            if let Some((t, u)) = self.try_flip(t) {
                stack.push(t);
                stack.push(u);
            }
        }
    }

    /// Whether the edge `a-b` with opposite vertices `c` (in `abc`, CCW) and `d`
    /// should be replaced by `c-d`.
    fn should_flip(&self, a: usize, b: usize, c: usize, d: usize) -> bool {
        let pts = &self.points;
        let v = incircle(pts[c], pts[a], pts[b], pts[d]);
        v > 0.0 || (v == 0.0 && c.min(d) < a.min(b))
    }

    /// Flips the edge opposite vertex 0 of `t` if it is not locally Delaunay.
    /// After a flip both triangles keep the old vertex 0 of `t` at index 0.
    fn try_flip(&mut self, t: usize) -> Option<(usize, usize)> {
        let [p, a, b] = self.triangles[t];
        let u = self.neighbors[t][0]?;
        let j = self.neighbors[u]
            .iter()
            .position(|&n| n == Some(t))
            .unwrap();
        self.rotate(u, j);
        let [d, _, _] = self.triangles[u];
        if !self.should_flip(a, b, p, d) {
            return None;
        }
        let [_, n1, n2] = self.neighbors[t];
        let [_, n3, n4] = self.neighbors[u];
        // Quad boundary p -> a -> d -> b; new diagonal p-d.
        self.triangles[t] = [p, a, d];
        self.neighbors[t] = [n3, Some(u), n2];
        self.triangles[u] = [p, d, b];
        self.neighbors[u] = [n4, n1, Some(t)];
        self.relink(n1, t, u);
        self.relink(n3, u, t);
        Some((t, u))
    }

    /// Applies the flip rule to every interior edge until none changes, making
    /// cocircular ties independent of insertion order.
    fn canonicalize(&mut self) {
        let limit = 4 * self.triangles.len() + 16;
        for _ in 0..limit {
            let mut changed = false;
            for t in 0..self.triangles.len() {
                for i in 0..3 {
                    let Some(u) = self.neighbors[t][i] else {
                        continue;
                    };
                    if u < t {
                        continue;
                    }
                    self.rotate(t, i);
                    if let Some((t, u)) = self.try_flip(t) {
                        changed = true;
                        self.legalize_all(&[t, u]);
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
}

fn check_duplicates(points: &[Point]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
            .then(i.cmp(&j))
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::DuplicateSite(w[0], w[1]));
        }
    }
    Ok(())
}
