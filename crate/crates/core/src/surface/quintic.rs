//! Bivariate quintic patch on one triangle.
//!
//! The patch lives in affine coordinates `(u, v)` where the triangle's vertices
//! map to `(0,0)`, `(1,0)` and `(0,1)`. Its 21 coefficients are fixed by the
//! value, first and second partial derivatives at the three vertices (18
//! conditions) plus the requirement that the derivative normal to each edge
//! varies only cubically along that edge (3 conditions). Along a shared edge
//! both neighbors then see the same quintic value and the same cubic normal
//! slope, so the assembled surface is C1.

use crate::mesh::Point;

/// Value and partial derivatives at a node:
/// `[z, z_x, z_y, z_xx, z_xy, z_yy]`.
pub type NodeJet = [f64; 6];

/// Number of coefficients `a_{i,j}` with `i + j <= 5`.
pub const NUM_COEFFS: usize = 21;

/// Position of `u^i v^j` in the coefficient array.
pub const fn coeff_index(i: usize, j: usize) -> usize {
    // Row i holds 6 - i entries.
    i * (13 - i) / 2 + j
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuinticPatch {
    origin: Point,
    /// Rows of the inverse affine map from `(x, y)` offsets to `(u, v)`.
    inv: [[f64; 2]; 2],
    coeffs: [f64; NUM_COEFFS],
}

impl QuinticPatch {
    /// Builds the patch for a counter-clockwise triangle. Returns `None` for a
    /// degenerate triangle.
    pub fn new(vertices: [Point; 3], jets: [NodeJet; 3]) -> Option<QuinticPatch> {
        let [p1, p2, p3] = vertices;
        let (a, b) = (p2[0] - p1[0], p3[0] - p1[0]);
        let (c, d) = (p2[1] - p1[1], p3[1] - p1[1]);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = [[d / det, -b / det], [-c / det, a / det]];

        // Derivatives in (u, v): x = x1 + a u + b v, y = y1 + c u + d v.
        let to_uv = |jet: &NodeJet| {
            let [_, zx, zy, zxx, zxy, zyy] = *jet;
            [
                a * zx + c * zy,
                b * zx + d * zy,
                a * a * zxx + 2.0 * a * c * zxy + c * c * zyy,
                a * b * zxx + (a * d + b * c) * zxy + c * d * zyy,
                b * b * zxx + 2.0 * b * d * zxy + d * d * zyy,
            ]
        };
        let [zu1, zv1, zuu1, zuv1, zvv1] = to_uv(&jets[0]);
        let [zu2, zv2, zuu2, zuv2, zvv2] = to_uv(&jets[1]);
        let [zu3, zv3, zuu3, zuv3, zvv3] = to_uv(&jets[2]);
        let (z1, z2, z3) = (jets[0][0], jets[1][0], jets[2][0]);

        let p00 = z1;
        let p10 = zu1;
        let p01 = zv1;
        let p20 = 0.5 * zuu1;
        let p11 = zuv1;
        let p02 = 0.5 * zvv1;

        // Edge v = 0: quintic in u from the jets at vertices 1 and 2.
        let h1 = z2 - p00 - p10 - p20;
        let h2 = zu2 - p10 - zuu1;
        let h3 = zuu2 - zuu1;
        let p30 = 10.0 * h1 - 4.0 * h2 + 0.5 * h3;
        let p40 = -15.0 * h1 + 7.0 * h2 - h3;
        let p50 = 6.0 * h1 - 3.0 * h2 + 0.5 * h3;

        // Edge u = 0: quintic in v from the jets at vertices 1 and 3.
        let h1 = z3 - p00 - p01 - p02;
        let h2 = zv3 - p01 - zvv1;
        let h3 = zvv3 - zvv1;
        let p03 = 10.0 * h1 - 4.0 * h2 + 0.5 * h3;
        let p04 = -15.0 * h1 + 7.0 * h2 - h3;
        let p05 = 6.0 * h1 - 3.0 * h2 + 0.5 * h3;

        // Cubic normal derivative along the two edges through vertex 1.
        let len_u = a.hypot(c);
        let len_v = b.hypot(d);
        let theta_xu = c.atan2(a);
        let theta_uv = d.atan2(b) - theta_xu;
        let cos_uv = theta_uv.cos();
        let p41 = 5.0 * len_v * cos_uv / len_u * p50;
        let p14 = 5.0 * len_u * cos_uv / len_v * p05;

        let h1 = zv2 - p01 - p11 - p41;
        let h2 = zuv2 - p11 - 4.0 * p41;
        let p21 = 3.0 * h1 - h2;
        let p31 = -2.0 * h1 + h2;
        let h1 = zu3 - p10 - p11 - p14;
        let h2 = zuv3 - p11 - 4.0 * p14;
        let p12 = 3.0 * h1 - h2;
        let p13 = -2.0 * h1 + h2;

        // Cubic normal derivative along the edge opposite vertex 1.
        let theta_us = (d - c).atan2(b - a) - theta_xu;
        let theta_sv = theta_uv - theta_us;
        let aa = theta_sv.sin() / len_u;
        let bb = -theta_sv.cos() / len_u;
        let cc = theta_us.sin() / len_v;
        let dd = theta_us.cos() / len_v;
        let ac = aa * cc;
        let ad = aa * dd;
        let bc = bb * cc;
        let g1 = aa * ac * (3.0 * bc + 2.0 * ad);
        let g2 = cc * ac * (3.0 * ad + 2.0 * bc);
        let h1 = -aa * aa * aa * (5.0 * aa * bb * p50 + (4.0 * bc + ad) * p41)
            - cc * cc * cc * (5.0 * cc * dd * p05 + (4.0 * ad + bc) * p14);
        let h2 = 0.5 * zvv2 - p02 - p12;
        let h3 = 0.5 * zuu3 - p20 - p21;
        let p22 = (g1 * h2 + g2 * h3 - h1) / (g1 + g2);
        let p32 = h2 - p22;
        let p23 = h3 - p22;

        let mut coeffs = [0.0; NUM_COEFFS];
        let entries = [
            ((0, 0), p00),
            ((1, 0), p10),
            ((0, 1), p01),
            ((2, 0), p20),
            ((1, 1), p11),
            ((0, 2), p02),
            ((3, 0), p30),
            ((4, 0), p40),
            ((5, 0), p50),
            ((0, 3), p03),
            ((0, 4), p04),
            ((0, 5), p05),
            ((4, 1), p41),
            ((1, 4), p14),
            ((2, 1), p21),
            ((3, 1), p31),
            ((1, 2), p12),
            ((1, 3), p13),
            ((2, 2), p22),
            ((3, 2), p32),
            ((2, 3), p23),
        ];
        for ((i, j), v) in entries {
            coeffs[coeff_index(i, j)] = v;
        }
        Some(QuinticPatch {
            origin: p1,
            inv,
            coeffs,
        })
    }

    /// Coefficients `a_{i,j}` of `u^i v^j`, indexed by [`coeff_index`].
    pub fn coeffs(&self) -> &[f64; NUM_COEFFS] {
        &self.coeffs
    }

    /// Affine coordinates of `p`.
    pub fn to_uv(&self, p: Point) -> (f64, f64) {
        let (dx, dy) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        (
            self.inv[0][0] * dx + self.inv[0][1] * dy,
            self.inv[1][0] * dx + self.inv[1][1] * dy,
        )
    }

    pub fn eval(&self, p: Point) -> f64 {
        let (u, v) = self.to_uv(p);
        self.eval_uv(u, v)
    }

    pub fn eval_uv(&self, u: f64, v: f64) -> f64 {
        // Horner in v for each power of u, then in u.
        let mut acc = 0.0;
        for i in (0..=5).rev() {
            let mut row = 0.0;
            for j in (0..=5 - i).rev() {
                row = row * v + self.coeffs[coeff_index(i, j)];
            }
            acc = acc * u + row;
        }
        acc
    }

    /// Gradient `(dT/dx, dT/dy)` at `p`.
    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let (u, v) = self.to_uv(p);
        let mut du = 0.0;
        let mut dv = 0.0;
        for i in 0..=5 {
            for j in 0..=5 - i {
                let a = self.coeffs[coeff_index(i, j)];
                if i > 0 {
                    du += a * i as f64 * u.powi(i as i32 - 1) * v.powi(j as i32);
                }
                if j > 0 {
                    dv += a * j as f64 * u.powi(i as i32) * v.powi(j as i32 - 1);
                }
            }
        }
        // Chain rule through the inverse affine map.
        [
            du * self.inv[0][0] + dv * self.inv[1][0],
            du * self.inv[0][1] + dv * self.inv[1][1],
        ]
    }
}
