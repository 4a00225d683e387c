//! Angle helpers. Everything internal is radians; degrees only appear at I/O edges.

use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;

/// Wraps an angle into `(-π, π]`.
pub fn normalize(angle: f64) -> f64 {
    if !angle.is_finite() {
        return angle;
    }
    let mut a = angle - TAU * ((angle + PI) / TAU).floor();
    // `a` is now in [-π, π); fold the lower bound onto π.
    if a <= -PI {
        a += TAU;
    }
    if a > PI {
        a -= TAU;
    }
    a
}

/// Signed smallest difference `a - b`, wrapped into `(-π, π]`.
pub fn diff(a: f64, b: f64) -> f64 {
    normalize(a - b)
}

#[inline]
pub fn deg(d: f64) -> f64 {
    d.to_radians()
}

#[inline]
pub fn to_deg(r: f64) -> f64 {
    r.to_degrees()
}

/// Circular (vector-sum) mean of a set of angles. Returns `None` for an empty
/// set or when the resultant vector vanishes.
pub fn circular_mean<I: IntoIterator<Item = f64>>(angles: I) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        s += a.sin();
        c += a.cos();
        n += 1;
    }
    if n == 0 || (s == 0.0 && c == 0.0) {
        return None;
    }
    Some(normalize(s.atan2(c)))
}
