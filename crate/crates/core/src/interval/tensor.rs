use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Interval, Rounding};
use crate::error::{Error, Result};

/// Per-element lower and upper bounds over a tensor stored in row-major
/// order. This is the Box domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTensor {
    pub shape: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Monotone scalar functions with a dedicated interval image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotone {
    Relu,
    Sigmoid,
    Tanh,
    Exp,
    Floor,
    Ceil,
    /// Conversion to an integer type, rounding half to even.
    Round,
}

impl Monotone {
    /// Enclosure of `f(x)`.
    pub fn enclose(self, x: f64, r: Rounding) -> (f64, f64) {
        match self {
            Monotone::Relu => {
                let y = x.max(0.0);
                (y, y)
            }
            Monotone::Sigmoid => r.sigmoid(x),
            Monotone::Tanh => {
                let t = x.tanh();
                (r.libm_lo(t).max(-1.0), r.libm_hi(t).min(1.0))
            }
            Monotone::Exp => r.exp(x),
            Monotone::Floor => (x.floor(), x.floor()),
            Monotone::Ceil => (x.ceil(), x.ceil()),
            Monotone::Round => (x.round_ties_even(), x.round_ties_even()),
        }
    }

    /// Plain evaluation.
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Monotone::Relu => x.max(0.0),
            Monotone::Sigmoid => super::sigmoid(x),
            Monotone::Tanh => x.tanh(),
            Monotone::Exp => x.exp(),
            Monotone::Floor => x.floor(),
            Monotone::Ceil => x.ceil(),
            Monotone::Round => x.round_ties_even(),
        }
    }
}

/// Numpy-style broadcast of two shapes.
pub fn broadcast_shapes(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let da = if i < n - a.len() { 1 } else { a[i - (n - a.len())] };
        let db = if i < n - b.len() { 1 } else { b[i - (n - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return Err(Error::Shape(format!("cannot broadcast {a:?} with {b:?}"))),
        };
    }
    Ok(out)
}

/// For every flat index of `out`, the flat index of the broadcast source.
pub(crate) fn broadcast_index(out: &[usize], src: &[usize]) -> Vec<usize> {
    let total: usize = out.iter().product();
    let offset = out.len() - src.len();
    let mut strides = vec![0usize; src.len()];
    let mut s = 1;
    for i in (0..src.len()).rev() {
        strides[i] = if src[i] == 1 { 0 } else { s };
        s *= src[i];
    }
    let mut idx = Vec::with_capacity(total);
    let mut counter = vec![0usize; out.len()];
    for _ in 0..total {
        let mut k = 0;
        for (i, &c) in counter.iter().enumerate().skip(offset) {
            k += c * strides[i - offset];
        }
        idx.push(k);
        for d in (0..out.len()).rev() {
            counter[d] += 1;
            if counter[d] < out[d] {
                break;
            }
            counter[d] = 0;
        }
    }
    idx
}

impl IntervalTensor {
    pub fn new(shape: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if lower.len() != n || upper.len() != n {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} elements, got {} lower and {} upper",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| lower[i] > upper[i] || lower[i].is_nan() || upper[i].is_nan()) {
            return Err(Error::Shape(format!("inverted bounds at element {i}: [{}, {}]", lower[i], upper[i])));
        }
        Ok(Self { shape, lower, upper })
    }

    /// A flat vector of intervals.
    pub fn from_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(vec![lower.len()], lower, upper)
    }

    pub fn from_intervals(shape: Vec<usize>, items: &[Interval]) -> Result<Self> {
        Self::new(shape, items.iter().map(|i| i.lo).collect(), items.iter().map(|i| i.hi).collect())
    }

    pub fn point(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(shape, values.clone(), values)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Interval {
        Interval { lo: self.lower[i], hi: self.upper[i] }
    }

    pub fn iter(&self) -> impl Iterator<Item = Interval> + '_ {
        self.lower.iter().zip(&self.upper).map(|(&lo, &hi)| Interval { lo, hi })
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn widths(&self) -> Vec<f64> {
        self.iter().map(|i| i.width()).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.iter().map(|i| i.lo + (i.hi - i.lo) * 0.5).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.len() && self.iter().zip(x).all(|(i, &v)| i.contains(v))
    }

    pub fn contains(&self, other: &IntervalTensor) -> bool {
        self.len() == other.len() && self.iter().zip(other.iter()).all(|(a, b)| a.contains_interval(&b))
    }

    pub fn reshaped(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} to {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Elementwise intersection; `None` when some element is empty.
    pub fn intersect(&self, other: &IntervalTensor) -> Option<IntervalTensor> {
        if self.len() != other.len() {
            return None;
        }
        let mut lower = Vec::with_capacity(self.len());
        let mut upper = Vec::with_capacity(self.len());
        for (a, b) in self.iter().zip(other.iter()) {
            let c = a.intersect(&b)?;
            lower.push(c.lo);
            upper.push(c.hi);
        }
        Some(IntervalTensor { shape: self.shape.clone(), lower, upper })
    }

    pub fn hull(&self, other: &IntervalTensor) -> IntervalTensor {
        let lower = self.lower.iter().zip(&other.lower).map(|(a, b)| a.min(*b)).collect();
        let upper = self.upper.iter().zip(&other.upper).map(|(a, b)| a.max(*b)).collect();
        IntervalTensor { shape: self.shape.clone(), lower, upper }
    }

    fn map(&self, f: impl Fn(Interval) -> Interval) -> IntervalTensor {
        let mut lower = Vec::with_capacity(self.len());
        let mut upper = Vec::with_capacity(self.len());
        for i in self.iter() {
            let o = f(i);
            lower.push(o.lo);
            upper.push(o.hi);
        }
        IntervalTensor { shape: self.shape.clone(), lower, upper }
    }

    fn zip_broadcast(&self, other: &IntervalTensor, f: impl Fn(Interval, Interval) -> Interval) -> Result<IntervalTensor> {
        let shape = broadcast_shapes(&self.shape, &other.shape)?;
        let ia = broadcast_index(&shape, &self.shape);
        let ib = broadcast_index(&shape, &other.shape);
        let mut lower = Vec::with_capacity(ia.len());
        let mut upper = Vec::with_capacity(ia.len());
        for (&a, &b) in ia.iter().zip(&ib) {
            let o = f(self.get(a), other.get(b));
            lower.push(o.lo);
            upper.push(o.hi);
        }
        Ok(IntervalTensor { shape, lower, upper })
    }
}

pub fn iv_add(a: &IntervalTensor, b: &IntervalTensor, r: Rounding) -> Result<IntervalTensor> {
    a.zip_broadcast(b, |x, y| x.add(y, r))
}

pub fn iv_neg(a: &IntervalTensor) -> IntervalTensor {
    a.map(Interval::neg)
}

pub fn iv_scalar_mul(k: f64, a: &IntervalTensor, r: Rounding) -> IntervalTensor {
    a.map(|x| x.scale(k, r))
}

pub fn iv_mul(a: &IntervalTensor, b: &IntervalTensor, r: Rounding) -> Result<IntervalTensor> {
    a.zip_broadcast(b, |x, y| x.mul(y, r))
}

pub fn iv_inv(a: &IntervalTensor, r: Rounding) -> IntervalTensor {
    a.map(|x| x.inv(r))
}

pub fn iv_monotone(f: Monotone, a: &IntervalTensor, r: Rounding) -> IntervalTensor {
    a.map(|x| x.monotone(f, r))
}

/// Image of an arbitrary monotone function, with `ulps` of outward slack.
pub fn iv_map_monotone(a: &IntervalTensor, f: impl Fn(f64) -> f64, increasing: bool, ulps: u32) -> IntervalTensor {
    let widen = |x: f64, up: bool| (0..ulps).fold(x, |v, _| if up { v.next_up() } else { v.next_down() });
    a.map(|x| {
        let (p, q) = if increasing { (f(x.lo), f(x.hi)) } else { (f(x.hi), f(x.lo)) };
        Interval { lo: widen(p, false), hi: widen(q, true) }
    })
}

/// `W x` over a flat interval vector, splitting `W` into its positive and
/// negative parts.
pub fn iv_matmul(w: &Array2<f64>, x: &IntervalTensor, r: Rounding) -> Result<IntervalTensor> {
    let (rows, cols) = w.dim();
    if cols != x.len() {
        return Err(Error::Dimension { expected: cols, found: x.len() });
    }
    let mut lower = Vec::with_capacity(rows);
    let mut upper = Vec::with_capacity(rows);
    for row in w.rows() {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (j, &wij) in row.iter().enumerate() {
            if wij > 0.0 {
                lo = r.add_lo(lo, r.mul_lo(wij, x.lower[j]));
                hi = r.add_hi(hi, r.mul_hi(wij, x.upper[j]));
            } else if wij < 0.0 {
                lo = r.add_lo(lo, r.mul_lo(wij, x.upper[j]));
                hi = r.add_hi(hi, r.mul_hi(wij, x.lower[j]));
            }
        }
        lower.push(lo);
        upper.push(hi);
    }
    Ok(IntervalTensor { shape: vec![rows], lower, upper })
}
