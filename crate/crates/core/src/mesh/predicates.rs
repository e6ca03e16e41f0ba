//! Orientation and in-circle predicates with exact fallback.
//!
//! Both predicates first evaluate in plain `f64` and accept the result when its
//! magnitude clears a forward error bound. Otherwise the determinant is
//! recomputed exactly over big integers, so the returned sign is always correct.

use num_bigint::BigInt;
use num_traits::{Float, Signed, ToPrimitive, Zero};

pub type Point = [f64; 2];

const EPS: f64 = f64::EPSILON * 0.5;
const ORIENT_BOUND: f64 = (3.0 + 16.0 * EPS) * EPS;
const INCIRCLE_BOUND: f64 = (10.0 + 96.0 * EPS) * EPS;

/// Twice the signed area of `abc`: positive when counter-clockwise.
pub fn orient2d(a: Point, b: Point, c: Point) -> f64 {
    let left = (a[0] - c[0]) * (b[1] - c[1]);
    let right = (a[1] - c[1]) * (b[0] - c[0]);
    let det = left - right;
    let bound = ORIENT_BOUND * (left.abs() + right.abs());
    if det.abs() > bound {
        return det;
    }
    let ([a, b, c], scale) = to_integers([a, b, c]);
    let exact = (&a[0] - &c[0]) * (&b[1] - &c[1]) - (&a[1] - &c[1]) * (&b[0] - &c[0]);
    to_signed_f64(&exact, 2 * scale)
}

/// In-circle determinant of `p` against the circle through `a`, `b`, `c`.
///
/// With `abc` counter-clockwise the result is positive when `p` lies strictly
/// inside the circle, zero when the four points are cocircular and negative
/// outside. Rows are `(x - px, y - py, (x² - px²) + (y² - py²))`, which is the
/// classic lifted determinant after column operations.
pub fn incircle(a: Point, b: Point, c: Point, p: Point) -> f64 {
    let (adx, ady) = (a[0] - p[0], a[1] - p[1]);
    let (bdx, bdy) = (b[0] - p[0], b[1] - p[1]);
    let (cdx, cdy) = (c[0] - p[0], c[1] - p[1]);

    let bdxcdy = bdx * cdy;
    let cdxbdy = cdx * bdy;
    let alift = adx * adx + ady * ady;
    let cdxady = cdx * ady;
    let adxcdy = adx * cdy;
    let blift = bdx * bdx + bdy * bdy;
    let adxbdy = adx * bdy;
    let bdxady = bdx * ady;
    let clift = cdx * cdx + cdy * cdy;

    let det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    let permanent = (bdxcdy.abs() + cdxbdy.abs()) * alift
        + (cdxady.abs() + adxcdy.abs()) * blift
        + (adxbdy.abs() + bdxady.abs()) * clift;
    if det.abs() > INCIRCLE_BOUND * permanent {
        return det;
    }

    let ([a, b, c, p], scale) = to_integers([a, b, c, p]);
    let (adx, ady) = (&a[0] - &p[0], &a[1] - &p[1]);
    let (bdx, bdy) = (&b[0] - &p[0], &b[1] - &p[1]);
    let (cdx, cdy) = (&c[0] - &p[0], &c[1] - &p[1]);
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    let exact = alift * (&bdx * &cdy - &cdx * &bdy)
        + blift * (&cdx * &ady - &adx * &cdy)
        + clift * (&adx * &bdy - &bdx * &ady);
    to_signed_f64(&exact, 4 * scale)
}

/// Scales all coordinates by a common power of two so they become integers.
/// Returns the integers and the exponent `e` such that `x = n * 2^e`.
fn to_integers<const N: usize>(points: [Point; N]) -> ([[BigInt; 2]; N], i32) {
    let decoded = points.map(|p| p.map(|x| Float::integer_decode(x)));
    let min_exp = decoded
        .iter()
        .flatten()
        .filter(|(m, _, _)| *m != 0)
        .map(|(_, e, _)| *e as i32)
        .min()
        .unwrap_or(0);
    let ints = decoded.map(|p| {
        p.map(|(mantissa, exp, sign)| {
            let n = BigInt::from(mantissa) << ((exp as i32 - min_exp).max(0) as usize);
            if sign < 0 {
                -n
            } else {
                n
            }
        })
    });
    (ints, min_exp)
}

/// Converts `n * 2^exp` to `f64`, keeping the sign even when the magnitude
/// under- or overflows.
fn to_signed_f64(n: &BigInt, exp: i32) -> f64 {
    if n.is_zero() {
        return 0.0;
    }
    let bits = n.bits() as i64;
    let shift = (bits - 60).max(0);
    let head = (n >> shift as usize).to_f64().unwrap_or(0.0);
    let total = exp as i64 + shift;
    let v = head * 2f64.powi(total.clamp(-1074, 1023) as i32);
    if v == 0.0 || !v.is_finite() {
        let mag = if v == 0.0 {
            f64::MIN_POSITIVE
        } else {
            f64::MAX
        };
        if n.is_negative() {
            -mag
        } else {
            mag
        }
    } else {
        v
    }
}
