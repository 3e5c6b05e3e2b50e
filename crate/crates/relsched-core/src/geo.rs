//! Exact geometric values: integer powers of `1 + delta`.
//!
//! Every rounding step in this toolkit snaps sizes, weights, speeds, and
//! release dates onto the geometric grid `(1 + delta)^k`, `k` an integer.
//! Carrying the exponent instead of the floating-point value keeps
//! multiplication and division exact (exponent addition/subtraction) and
//! makes "same grid point" checks robust.  Conversion back to a real number
//! happens once, at the edge, via `exp(k * ln(1 + delta))`.

use serde::{Deserialize, Serialize};

/// Absolute/relative tolerance used whenever a geometric quantity has to be
/// compared through its floating-point image.
pub const GEO_TOL: f64 = 1e-9;

/// An exact power `(1 + delta)^exponent`.
///
/// The value of `delta` is context: a `GeoValue` only makes sense relative to
/// the parameter pack that produced it, so arithmetic never needs `delta`,
/// only [`GeoValue::value`] does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GeoValue {
    /// The integer exponent `k` in `(1 + delta)^k`.
    pub exponent: i64,
}

impl GeoValue {
    /// Wraps an exponent.
    pub fn new(exponent: i64) -> Self {
        GeoValue { exponent }
    }

    /// Exact product: exponents add.
    pub fn mul(self, other: GeoValue) -> GeoValue {
        GeoValue::new(self.exponent + other.exponent)
    }

    /// Exact quotient: exponents subtract.
    pub fn div(self, other: GeoValue) -> GeoValue {
        GeoValue::new(self.exponent - other.exponent)
    }

    /// The real value `(1 + delta)^exponent`.
    pub fn value(self, delta: f64) -> f64 {
        pow1p(delta, self.exponent)
    }
}

/// `(1 + delta)^k` for a (possibly negative) integer exponent, computed as
/// `exp(k * ln(1 + delta))` so that very large magnitudes stay monotone.
pub fn pow1p(delta: f64, k: i64) -> f64 {
    (k as f64 * delta.ln_1p()).exp()
}

/// `log_{1+delta}(x)` as a real number; `x` must be positive.
pub fn log1p_base(delta: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0, "logarithm of non-positive value {x}");
    x.ln() / delta.ln_1p()
}

/// Largest integer `k` with `(1 + delta)^k <= x`, with a verification pass.
///
/// The raw `floor(ln x / ln(1+delta))` can be off by one when `x` sits within
/// floating-point noise of a grid point, so the candidate is nudged until the
/// defining inequality `(1+delta)^k <= x < (1+delta)^{k+1}` holds under
/// [`GEO_TOL`].  A value within tolerance of a grid point is treated as lying
/// exactly on it.
pub fn floor_log(delta: f64, x: f64) -> i64 {
    assert!(x > 0.0, "floor_log of non-positive value {x}");
    let mut k = log1p_base(delta, x).floor() as i64;
    // Snap: if x is essentially (1+delta)^{k+1}, the floor is k+1.
    while !geo_le(pow1p(delta, k), x) {
        k -= 1;
    }
    while geo_le(pow1p(delta, k + 1), x) {
        k += 1;
    }
    k
}

/// Smallest integer `k` with `(1 + delta)^k >= x`, with a verification pass.
pub fn ceil_log(delta: f64, x: f64) -> i64 {
    assert!(x > 0.0, "ceil_log of non-positive value {x}");
    let mut k = log1p_base(delta, x).ceil() as i64;
    while !geo_ge(pow1p(delta, k), x) {
        k += 1;
    }
    while geo_ge(pow1p(delta, k - 1), x) {
        k -= 1;
    }
    k
}

/// The exponent of `x` if `x` is (within tolerance) an exact grid point
/// `(1 + delta)^k`; `None` otherwise.
pub fn exact_exponent(delta: f64, x: f64) -> Option<i64> {
    if x <= 0.0 {
        return None;
    }
    let k = log1p_base(delta, x).round() as i64;
    if geo_eq(pow1p(delta, k), x) {
        Some(k)
    } else {
        None
    }
}

/// Snaps `x` up to the grid: `(1 + delta)^{ceil_log(x)}` as a [`GeoValue`].
pub fn round_up(delta: f64, x: f64) -> GeoValue {
    GeoValue::new(ceil_log(delta, x))
}

/// Snaps `x` down to the grid: `(1 + delta)^{floor_log(x)}` as a [`GeoValue`].
pub fn round_down(delta: f64, x: f64) -> GeoValue {
    GeoValue::new(floor_log(delta, x))
}

/// Relative equality under [`GEO_TOL`] (absolute when both operands are
/// below 1, so that comparisons against 0 still behave).  Geometric
/// quantities span hundreds of orders of magnitude, so the tolerance must
/// scale with the operands: a fixed absolute tolerance would declare all
/// sub-tolerance grid points equal.
pub fn geo_eq(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= GEO_TOL * scale
}

/// `a <= b` up to [`GEO_TOL`], relative to the operand scale.
pub fn geo_le(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    a <= b + GEO_TOL * scale
}

/// `a >= b` up to [`GEO_TOL`].
pub fn geo_ge(a: f64, b: f64) -> bool {
    geo_le(b, a)
}

/// `a < b` strictly, i.e. not within tolerance of equality.
pub fn geo_lt(a: f64, b: f64) -> bool {
    !geo_ge(a, b)
}
