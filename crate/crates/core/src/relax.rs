//! Per-neuron linear relaxations of nonlinear activations.
//!
//! A relaxation states that for every `x` in `[l, u]` the activation output
//! lies in `slope * x + [lo, hi]` (or in a constant interval). The residual
//! bounds are computed with the analysis rounding so any slope yields a
//! sound enclosure.

use crate::error::{Error, Result};
use crate::interval::{Interval, Rounding};

/// Cast flavours for float-to-integer conversions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CastMode {
    Floor,
    Ceil,
    /// Round half to even.
    Round,
}

impl CastMode {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            CastMode::Floor => x.floor(),
            CastMode::Ceil => x.ceil(),
            CastMode::Round => x.round_ties_even(),
        }
    }

    /// Range of `cast(x) - x`.
    fn residual(self) -> (f64, f64) {
        match self {
            CastMode::Floor => (-1.0, 0.0),
            CastMode::Ceil => (0.0, 1.0),
            CastMode::Round => (-0.5, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relax {
    /// Output independent of the input.
    Constant(Interval),
    /// Output equals input.
    Identity,
    /// Output in `slope * x + [lo, hi]`.
    Linear { slope: f64, lo: f64, hi: f64 },
}

impl Relax {
    /// Whether the relaxation introduces a fresh noise symbol.
    pub fn needs_symbol(&self) -> bool {
        matches!(*self, Relax::Linear { lo, hi, .. } if hi > lo)
    }

    /// Whether the neuron is unstable (relaxed by a genuine linear band).
    pub fn is_linear(&self) -> bool {
        matches!(self, Relax::Linear { .. })
    }
}

fn check(l: f64, u: f64) -> Result<()> {
    if !(l.is_finite() && u.is_finite()) {
        return Err(Error::InfiniteBound(0));
    }
    if l > u {
        return Err(Error::Shape(format!("inverted pre-activation bounds [{l}, {u}]")));
    }
    Ok(())
}

/// Enclosure of `f(x) - slope * x` given an enclosure `[f_lo, f_hi]` of `f(x)`.
fn residual_at(slope: f64, x: f64, f: (f64, f64), r: Rounding) -> Interval {
    let ax = Interval::point(x).scale(slope, r);
    Interval { lo: r.sub_lo(f.0, ax.hi), hi: r.sub_hi(f.1, ax.lo) }
}

/// ReLU over `[l, u]`: zero when `u <= 0`, identity when `l >= 0`, else the
/// band with slope `u / (u - l)`.
pub fn relu(l: f64, u: f64, r: Rounding) -> Result<Relax> {
    check(l, u)?;
    if u <= 0.0 {
        return Ok(Relax::Constant(Interval::point(0.0)));
    }
    if l >= 0.0 {
        return Ok(Relax::Identity);
    }
    let slope = u / (u - l);
    let at_l = residual_at(slope, l, (0.0, 0.0), r);
    let at_u = residual_at(slope, u, (u, u), r);
    let lo = 0f64.min(at_l.lo).min(at_u.lo);
    let hi = 0f64.max(at_l.hi).max(at_u.hi);
    Ok(Relax::Linear { slope, lo, hi })
}

/// Interval value of `f(x) - a x` and of its derivative `f'(x) - a` at `x`.
fn sigmoid_residual(a: f64, x: f64, r: Rounding) -> (Interval, Interval) {
    let s = r.sigmoid(x);
    let value = residual_at(a, x, s, r);
    let si = Interval { lo: s.0, hi: s.1 };
    let one_minus = Interval { lo: r.sub_lo(1.0, s.1), hi: r.sub_hi(1.0, s.0) };
    let deriv = si.mul(one_minus, r).sub(Interval::point(a), r);
    (value, deriv)
}

/// Bound of the tangent line of the residual at `t`, evaluated at `x`.
fn tangent_at(a: f64, t: f64, x: f64, r: Rounding) -> Interval {
    let (v, d) = sigmoid_residual(a, t, r);
    let dx = Interval { lo: r.sub_lo(x, t), hi: r.sub_hi(x, t) };
    v.add(d.mul(dx, r), r)
}

/// Points where the logistic derivative equals `a`, as `(negative, positive)`.
fn tangency_points(a: f64) -> Option<(f64, f64)> {
    if !(a > 0.0 && a < 0.25) {
        return None;
    }
    let s = 0.5 * (1.0 + (1.0 - 4.0 * a).sqrt());
    let x = (s / (1.0 - s)).ln();
    Some((-x, x))
}

/// Logistic sigmoid over `[l, u]` with slope equal to the chord.
///
/// The residual `sigma(x) - a x` is convex for `x <= 0` and concave for
/// `x >= 0`. On each piece the extreme attained at the endpoints is exact
/// and the opposite one is bounded by the tangent at the stationary point.
pub fn sigmoid(l: f64, u: f64, r: Rounding) -> Result<Relax> {
    check(l, u)?;
    if l == u {
        let (lo, hi) = r.sigmoid(l);
        return Ok(Relax::Constant(Interval { lo, hi }));
    }
    let a = (crate::interval::sigmoid(u) - crate::interval::sigmoid(l)) / (u - l);
    let a = if a.is_finite() { a.max(0.0) } else { 0.0 };
    let (xm, xp) = tangency_points(a).unwrap_or((0.0, 0.0));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let ends = |x: f64| residual_at(a, x, r.sigmoid(x), r);
    if l < 0.0 {
        let (p, q) = (l, u.min(0.0));
        let (ep, eq) = (ends(p), ends(q));
        hi = hi.max(ep.hi).max(eq.hi);
        let t = xm.clamp(p, q);
        lo = lo.min(tangent_at(a, t, p, r).lo).min(tangent_at(a, t, q, r).lo);
    }
    if u > 0.0 {
        let (p, q) = (l.max(0.0), u);
        let (ep, eq) = (ends(p), ends(q));
        lo = lo.min(ep.lo).min(eq.lo);
        let t = xp.clamp(p, q);
        hi = hi.max(tangent_at(a, t, p, r).hi).max(tangent_at(a, t, q, r).hi);
    }
    Ok(Relax::Linear { slope: a, lo, hi })
}

/// `tanh(x) = 2 sigmoid(2x) - 1`, relaxed through the sigmoid band.
pub fn tanh(l: f64, u: f64, r: Rounding) -> Result<Relax> {
    check(l, u)?;
    let two = |v: f64| if v.is_finite() { 2.0 * v } else { v };
    let shift = |iv: Interval| Interval { lo: r.sub_lo(two(iv.lo), 1.0), hi: r.sub_hi(two(iv.hi), 1.0) };
    Ok(match sigmoid(two(l), two(u), r)? {
        Relax::Constant(iv) => Relax::Constant(shift(iv)),
        Relax::Linear { slope, lo, hi } => {
            let band = shift(Interval { lo, hi });
            Relax::Linear { slope: 4.0 * slope, lo: band.lo, hi: band.hi }
        }
        Relax::Identity => unreachable!("sigmoid is never the identity"),
    })
}

/// Float-to-integer conversion: constant when both bounds land on the same
/// integer, otherwise `x` plus the width-1 residual of the mode.
pub fn cast(mode: CastMode, l: f64, u: f64) -> Result<Relax> {
    check(l, u)?;
    let (cl, cu) = (mode.apply(l), mode.apply(u));
    if cl == cu {
        return Ok(Relax::Constant(Interval::point(cl)));
    }
    let (lo, hi) = mode.residual();
    Ok(Relax::Linear { slope: 1.0, lo, hi })
}
