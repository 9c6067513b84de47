//! Outward-rounded interval arithmetic and the Box domain.

mod round;
mod tensor;

pub use round::{add_down, add_up, div_down, div_up, mul_down, mul_up, sigmoid, Rounding, TRANSCENDENTAL_ULPS};
pub(crate) use round::{mid_rad, sum_up, ErrorSum};
pub use tensor::{
    broadcast_shapes, iv_add, iv_inv, iv_map_monotone, iv_matmul, iv_monotone, iv_mul, iv_neg, iv_scalar_mul, IntervalTensor,
    Monotone,
};
pub(crate) use tensor::broadcast_index;

use serde::{Deserialize, Serialize};

/// A closed real interval `[lo, hi]`, possibly with infinite ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    #[inline]
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    #[inline]
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// The unbounded interval, used as the result of dividing by zero.
    #[inline]
    pub fn top() -> Self {
        Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    #[inline]
    pub fn is_top(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    pub fn add(self, o: Interval, r: Rounding) -> Interval {
        Interval { lo: r.add_lo(self.lo, o.lo), hi: r.add_hi(self.hi, o.hi) }
    }

    pub fn sub(self, o: Interval, r: Rounding) -> Interval {
        self.add(o.neg(), r)
    }

    #[inline]
    pub fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    pub fn scale(self, k: f64, r: Rounding) -> Interval {
        if k >= 0.0 {
            Interval { lo: r.mul_lo(k, self.lo), hi: r.mul_hi(k, self.hi) }
        } else {
            Interval { lo: r.mul_lo(k, self.hi), hi: r.mul_hi(k, self.lo) }
        }
    }

    pub fn mul(self, o: Interval, r: Rounding) -> Interval {
        let pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)];
        let lo = pairs.iter().map(|&(a, b)| r.mul_lo(a, b)).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|&(a, b)| r.mul_hi(a, b)).fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    /// `1 / [c, d]`, or top when `c <= 0 <= d`.
    pub fn inv(self, r: Rounding) -> Interval {
        if self.lo <= 0.0 && 0.0 <= self.hi {
            return Interval::top();
        }
        Interval { lo: r.div_lo(1.0, self.hi), hi: r.div_hi(1.0, self.lo) }
    }

    pub fn div(self, o: Interval, r: Rounding) -> Interval {
        if o.lo <= 0.0 && 0.0 <= o.hi {
            return Interval::top();
        }
        let pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)];
        let lo = pairs.iter().map(|&(a, b)| r.div_lo(a, b)).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|&(a, b)| r.div_hi(a, b)).fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    pub fn monotone(self, f: Monotone, r: Rounding) -> Interval {
        let (lo, _) = f.enclose(self.lo, r);
        let (_, hi) = f.enclose(self.hi, r);
        Interval { lo, hi }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}
