//! Numeric abstraction for the timing engine.
//!
//! Everything that adds, compares and scales delays (graph propagation,
//! slack computation, skew scheduling) is written against [`Scalar`], so the
//! same analysis runs on `f64`, `f32` or exact rationals. Parsed inputs are
//! always `f64` nanoseconds and are converted on entry.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A time value in nanoseconds.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Absolute tolerance used when deciding pass/fail on a slack.
    fn tolerance() -> Self;

    fn from_ns(ns: f64) -> Self {
        Self::from_f64(ns).unwrap_or_else(|| panic!("{ns} ns is not representable"))
    }

    fn to_ns(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_count(n: u32) -> Self {
        Self::from_u32(n).expect("small integers are representable")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn half(self) -> Self {
        self / (Self::one() + Self::one())
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    // 1e-9 ns is below f32 resolution at nanosecond magnitudes.
    fn tolerance() -> Self {
        1e-6
    }
}

impl Scalar for Ratio<i64> {
    fn tolerance() -> Self {
        Ratio::from_integer(0)
    }

    /// Decimal inputs are converted through their shortest decimal
    /// representation, so `0.12` becomes exactly `3/25`.
    fn from_ns(ns: f64) -> Self {
        decimal_ratio(ns).unwrap_or_else(|| panic!("{ns} ns is not representable"))
    }
}

fn decimal_ratio(v: f64) -> Option<Ratio<i64>> {
    if !v.is_finite() {
        return None;
    }
    let text = format!("{v}");
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text.as_str(), ""),
    };
    let denom = 10i64.checked_pow(frac_part.len() as u32)?;
    let digits: String = format!("{int_part}{frac_part}");
    let numer: i64 = digits.parse().ok()?;
    Some(Ratio::new(numer, denom))
}

/// `true` when `a` is within the scalar's tolerance of `b`.
pub fn approx_eq<T: Scalar>(a: T, b: T) -> bool {
    let diff = if a > b { a - b } else { b - a };
    diff <= T::tolerance()
}
