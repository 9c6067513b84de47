//! Directed rounding built on round-to-nearest arithmetic.
//!
//! Every primitive is evaluated in the default rounding mode and the exact
//! residual is recovered with an error-free transformation (two-sum, fused
//! multiply-add). The result is stepped one ulp outward only when the
//! residual shows the nearest result lies on the wrong side. Results that are
//! exactly representable are therefore returned unchanged, and no global FPU
//! state is touched.

use serde::{Deserialize, Serialize};

/// Below this magnitude a product or quotient may have lost bits to gradual
/// underflow, so the fma residual is no longer exact.
const RESIDUAL_LIMIT: f64 = f64::MIN_POSITIVE * 9_007_199_254_740_992.0; // 2^-969

/// Smallest positive subnormal.
pub(crate) const TINY: f64 = f64::from_bits(1);

/// Ulps of slack granted to libm transcendentals.
pub const TRANSCENDENTAL_ULPS: u32 = 4;

/// Analysis-wide arithmetic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Bounds enclose the real-arithmetic result.
    #[default]
    Sound,
    /// Plain round-to-nearest; bounds may miss the real result by rounding error.
    Fast,
}

#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn overflowed(r: f64, a: f64, b: f64) -> bool {
    r.is_infinite() && a.is_finite() && b.is_finite()
}

pub fn add_down(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return if s == f64::INFINITY && overflowed(s, a, b) { f64::MAX } else { s };
    }
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

pub fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return if s == f64::NEG_INFINITY && overflowed(s, a, b) { f64::MIN } else { s };
    }
    if e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// Product with the extended-real convention `0 * inf = 0`.
#[inline]
pub(crate) fn mul_ext(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Sign of `a*b - fl(a*b)`, or `None` when it cannot be recovered exactly.
#[inline]
fn mul_residual_sign(a: f64, b: f64, p: f64) -> Option<f64> {
    if p.abs() < RESIDUAL_LIMIT {
        return None;
    }
    Some(a.mul_add(b, -p))
}

pub fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.is_infinite() {
        return if p == f64::INFINITY && overflowed(p, a, b) { f64::MAX } else { p };
    }
    match mul_residual_sign(a, b, p) {
        Some(e) if e >= 0.0 => p,
        _ => p.next_down(),
    }
}

pub fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.is_infinite() {
        return if p == f64::NEG_INFINITY && overflowed(p, a, b) { f64::MIN } else { p };
    }
    match mul_residual_sign(a, b, p) {
        Some(e) if e <= 0.0 => p,
        _ => p.next_up(),
    }
}

/// `Some(true)` when `fl(a/b)` is above the real quotient, `Some(false)` when
/// below or exact, `None` when undecidable.
#[inline]
fn quotient_above(a: f64, b: f64, q: f64) -> Option<Option<bool>> {
    if q.abs() < RESIDUAL_LIMIT || a.abs() < RESIDUAL_LIMIT || !q.is_finite() {
        return None;
    }
    // r = q*b - a, so q - a/b has the sign of r/b.
    let r = q.mul_add(b, -a);
    if r == 0.0 {
        Some(None)
    } else {
        Some(Some((r > 0.0) == (b > 0.0)))
    }
}

pub fn div_down(a: f64, b: f64) -> f64 {
    if a == 0.0 && b != 0.0 {
        return 0.0;
    }
    let q = a / b;
    if q.is_infinite() {
        return if q == f64::INFINITY && a.is_finite() && b.is_finite() && b != 0.0 { f64::MAX } else { q };
    }
    match quotient_above(a, b, q) {
        Some(None) | Some(Some(false)) => q,
        _ => q.next_down(),
    }
}

pub fn div_up(a: f64, b: f64) -> f64 {
    if a == 0.0 && b != 0.0 {
        return 0.0;
    }
    let q = a / b;
    if q.is_infinite() {
        return if q == f64::NEG_INFINITY && a.is_finite() && b.is_finite() && b != 0.0 { f64::MIN } else { q };
    }
    match quotient_above(a, b, q) {
        Some(None) | Some(Some(true)) => q,
        _ => q.next_up(),
    }
}

fn step_down(mut x: f64, ulps: u32) -> f64 {
    for _ in 0..ulps {
        x = x.next_down();
    }
    x
}

fn step_up(mut x: f64, ulps: u32) -> f64 {
    for _ in 0..ulps {
        x = x.next_up();
    }
    x
}

impl Rounding {
    #[inline]
    pub fn is_sound(self) -> bool {
        self == Rounding::Sound
    }

    #[inline]
    pub fn add_lo(self, a: f64, b: f64) -> f64 {
        match self {
            Rounding::Sound => add_down(a, b),
            Rounding::Fast => a + b,
        }
    }

    #[inline]
    pub fn add_hi(self, a: f64, b: f64) -> f64 {
        match self {
            Rounding::Sound => add_up(a, b),
            Rounding::Fast => a + b,
        }
    }

    #[inline]
    pub fn sub_lo(self, a: f64, b: f64) -> f64 {
        self.add_lo(a, -b)
    }

    #[inline]
    pub fn sub_hi(self, a: f64, b: f64) -> f64 {
        self.add_hi(a, -b)
    }

    #[inline]
    pub fn mul_lo(self, a: f64, b: f64) -> f64 {
        match self {
            Rounding::Sound => mul_down(a, b),
            Rounding::Fast => mul_ext(a, b),
        }
    }

    #[inline]
    pub fn mul_hi(self, a: f64, b: f64) -> f64 {
        match self {
            Rounding::Sound => mul_up(a, b),
            Rounding::Fast => mul_ext(a, b),
        }
    }

    #[inline]
    pub fn div_lo(self, a: f64, b: f64) -> f64 {
        match self {
            Rounding::Sound => div_down(a, b),
            Rounding::Fast => a / b,
        }
    }

    #[inline]
    pub fn div_hi(self, a: f64, b: f64) -> f64 {
        match self {
            Rounding::Sound => div_up(a, b),
            Rounding::Fast => a / b,
        }
    }

    /// Lower end of a libm result, stepped outward in sound mode.
    #[inline]
    pub fn libm_lo(self, x: f64) -> f64 {
        match self {
            Rounding::Sound => step_down(x, TRANSCENDENTAL_ULPS),
            Rounding::Fast => x,
        }
    }

    #[inline]
    pub fn libm_hi(self, x: f64) -> f64 {
        match self {
            Rounding::Sound => step_up(x, TRANSCENDENTAL_ULPS),
            Rounding::Fast => x,
        }
    }

    /// Enclosure of `exp(x)`.
    pub fn exp(self, x: f64) -> (f64, f64) {
        let e = x.exp();
        (self.libm_lo(e).max(0.0), self.libm_hi(e))
    }

    /// Enclosure of the logistic function `1 / (1 + exp(-x))`.
    pub fn sigmoid(self, x: f64) -> (f64, f64) {
        match self {
            Rounding::Fast => {
                let s = sigmoid(x);
                (s, s)
            }
            Rounding::Sound => {
                let (e_lo, e_hi) = self.exp(-x);
                let d_hi = add_up(1.0, e_hi);
                let d_lo = add_down(1.0, e_lo);
                let lo = if d_hi.is_infinite() { 0.0 } else { div_down(1.0, d_hi) };
                let hi = div_up(1.0, d_lo);
                (lo.max(0.0), hi.min(1.0))
            }
        }
    }
}

/// Plain logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Running dot product that tracks a rigorous bound on its accumulated
/// rounding error. In fast mode the bound stays zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ErrorSum {
    value: f64,
    err: f64,
    sound: bool,
}

impl ErrorSum {
    #[inline]
    pub fn new(rounding: Rounding) -> Self {
        Self { value: 0.0, err: 0.0, sound: rounding.is_sound() }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.value, x);
        self.value = s;
        if self.sound && e != 0.0 {
            self.err = add_up(self.err, e.abs());
        }
    }

    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        if a == 0.0 || b == 0.0 {
            return;
        }
        let p = a * b;
        if self.sound {
            let ep = a.mul_add(b, -p).abs();
            let ep = if p.abs() < RESIDUAL_LIMIT { add_up(ep, TINY) } else { ep };
            if ep != 0.0 {
                self.err = add_up(self.err, ep);
            }
        }
        self.add(p);
    }

    /// Fold an externally known error radius into the bound.
    #[inline]
    pub fn add_radius(&mut self, r: f64) {
        if self.sound && r != 0.0 {
            self.err = add_up(self.err, r);
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn error(&self) -> f64 {
        self.err
    }
}

/// Sum of nonnegative terms rounded upward.
pub(crate) fn sum_up<I: IntoIterator<Item = f64>>(rounding: Rounding, terms: I) -> f64 {
    terms.into_iter().fold(0.0, |acc, t| rounding.add_hi(acc, t))
}

/// Midpoint and radius of `[lo, hi]` such that `[mid - rad, mid + rad]`
/// contains it.
pub(crate) fn mid_rad(rounding: Rounding, lo: f64, hi: f64) -> (f64, f64) {
    let mid = lo + (hi - lo) * 0.5;
    let mid = if mid.is_finite() { mid } else { 0.5 * lo + 0.5 * hi };
    let rad = rounding.sub_hi(hi, mid).max(rounding.sub_hi(mid, lo)).max(0.0);
    (mid, rad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_results_are_not_widened() {
        assert_eq!(add_down(1.0, 2.0), 3.0);
        assert_eq!(add_up(1.0, 2.0), 3.0);
        assert_eq!(mul_down(3.0, 0.5), 1.5);
        assert_eq!(div_up(1.0, 4.0), 0.25);
    }

    #[test]
    fn inexact_results_bracket_the_real_value() {
        // 0.1 + 0.2 is not representable.
        let lo = add_down(0.1, 0.2);
        let hi = add_up(0.1, 0.2);
        assert!(lo < hi);
        assert_eq!(lo.next_up(), hi);
        // 1/3
        let lo = div_down(1.0, 3.0);
        let hi = div_up(1.0, 3.0);
        assert!(lo * 3.0 <= 1.0 && hi * 3.0 >= 1.0);
        assert_eq!(lo.next_up(), hi);
        let lo = mul_down(0.1, 0.1);
        let hi = mul_up(0.1, 0.1);
        assert_eq!(lo.next_up(), hi);
    }

    #[test]
    fn overflow_and_underflow_are_conservative() {
        assert_eq!(add_down(f64::MAX, f64::MAX), f64::MAX);
        assert_eq!(add_up(f64::MAX, f64::MAX), f64::INFINITY);
        assert!(mul_down(1e-300, 1e-300) < 0.0);
        assert!(mul_up(1e-300, 1e-300) > 0.0);
        assert_eq!(mul_down(0.0, f64::INFINITY), 0.0);
    }

    #[test]
    fn error_sum_is_zero_when_exact() {
        let mut s = ErrorSum::new(Rounding::Sound);
        s.add_product(3.0, 1.0);
        s.add_product(-1.0, 1.0);
        s.add(-2.0);
        assert_eq!(s.value(), 0.0);
        assert_eq!(s.error(), 0.0);

        let mut s = ErrorSum::new(Rounding::Sound);
        s.add_product(0.1, 3.0);
        s.add(0.7);
        assert!(s.error() > 0.0 && s.error() < 1e-15);
    }

    #[test]
    fn sigmoid_enclosure_contains_half_at_zero() {
        let (lo, hi) = Rounding::Sound.sigmoid(0.0);
        assert!(lo <= 0.5 && 0.5 <= hi);
        assert!(hi - lo < 1e-15);
        assert_eq!(Rounding::Fast.sigmoid(0.0), (0.5, 0.5));
    }
}
