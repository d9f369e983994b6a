//! Extended-precision helpers.
//!
//! All probability arithmetic that feeds ⟨gap⟩, q* or an audit goes through
//! [`Float`] at [`PRECISION`] bits, comfortably above binary128's 113-bit
//! significand. Binomial coefficients are exact [`Integer`]s.

use rug::ops::Pow;
use rug::{Float, Integer};

/// Significand bits used for every extended-precision value in the crate.
pub const PRECISION: u32 = 128;

/// Largest `k` for which binomial rows are materialised.
pub const MAX_BINOMIAL_K: usize = 4096;

/// Lift an `f64` (exactly) into extended precision.
pub fn real(x: f64) -> Float {
    Float::with_val(PRECISION, x)
}

pub fn from_int(x: &Integer) -> Float {
    Float::with_val(PRECISION, x)
}

pub fn from_usize(x: usize) -> Float {
    Float::with_val(PRECISION, x)
}

/// `2^(-k)` exactly.
pub fn inv_pow2(k: usize) -> Float {
    let two = Float::with_val(PRECISION, 2);
    two.pow(-(k as i64))
}

/// The full row `C(k, 0), ..., C(k, k)` as exact integers.
pub fn binomial_row(k: usize) -> Vec<Integer> {
    let mut row = Vec::with_capacity(k + 1);
    let mut c = Integer::from(1);
    row.push(c.clone());
    for i in 0..k {
        c *= k - i;
        c /= i + 1;
        row.push(c.clone());
    }
    row
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: &Float, b: &Float) -> f64 {
    let diff = Float::with_val(PRECISION, a - b).abs();
    let scale = if a.clone().abs() > b.clone().abs() {
        a.clone().abs()
    } else {
        b.clone().abs()
    };
    if scale.is_zero() {
        0.0
    } else {
        (diff / scale).to_f64()
    }
}
