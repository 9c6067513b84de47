//! Safety properties: an input box and a predicate over the outputs.

mod layer;
pub mod textual;
pub mod vnnlib;

use std::fmt;

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalTensor, Rounding};

pub use layer::append_property_layer;

/// `sum outputs[j].1 * y[outputs[j].0] + sum inputs[i].1 * x[inputs[i].0] <= rhs`,
/// or `< rhs` when `strict`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAtom {
    pub outputs: Vec<(usize, f64)>,
    pub inputs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub strict: bool,
}

impl LinearAtom {
    pub fn output_le(outputs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { outputs, inputs: Vec::new(), rhs, strict: false }
    }

    /// The complement `-lhs < -rhs` (or `<=` when this atom is strict).
    pub fn negated(&self) -> Self {
        Self {
            outputs: self.outputs.iter().map(|&(i, c)| (i, -c)).collect(),
            inputs: self.inputs.iter().map(|&(i, c)| (i, -c)).collect(),
            rhs: -self.rhs,
            strict: !self.strict,
        }
    }

    pub fn lhs(&self, x: &[f64], y: &[f64]) -> f64 {
        let o: f64 = self.outputs.iter().map(|&(i, c)| c * y[i]).sum();
        let i: f64 = self.inputs.iter().map(|&(i, c)| c * x[i]).sum();
        o + i
    }

    pub fn holds(&self, x: &[f64], y: &[f64]) -> bool {
        let v = self.lhs(x, y);
        if self.strict {
            v < self.rhs
        } else {
            v <= self.rhs
        }
    }

    /// Three-valued verdict for a sound enclosure of the left-hand side.
    pub fn decide(&self, lhs: Interval) -> Tri {
        let (sat, unsat) = if self.strict { (lhs.hi < self.rhs, lhs.lo >= self.rhs) } else { (lhs.hi <= self.rhs, lhs.lo > self.rhs) };
        if sat {
            Tri::True
        } else if unsat {
            Tri::False
        } else {
            Tri::Unknown
        }
    }

    /// Interval enclosure of the left-hand side from per-variable bounds.
    pub fn enclose(&self, outputs: &IntervalTensor, inputs: Option<&IntervalTensor>, r: Rounding) -> Interval {
        let mut acc = Interval::point(0.0);
        for &(i, c) in &self.outputs {
            acc = acc.add(outputs.get(i).scale(c, r), r);
        }
        for &(i, c) in &self.inputs {
            let b = inputs.map_or(Interval::top(), |t| t.get(i));
            acc = acc.add(b.scale(c, r), r);
        }
        acc
    }

    pub fn max_output(&self) -> Option<usize> {
        self.outputs.iter().map(|&(i, _)| i).max()
    }
}

impl fmt::Display for LinearAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.outputs.iter().map(|&(i, c)| (c, 'y', i)).chain(self.inputs.iter().map(|&(i, c)| (c, 'x', i)));
        let mut empty = true;
        for (k, (c, v, i)) in terms.enumerate() {
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c < 0.0 { "-" } else { "+" })?;
            }
            if c.abs() != 1.0 {
                write!(f, "{}*", c.abs())?;
            }
            write!(f, "{v}[{i}]")?;
            empty = false;
        }
        if empty {
            write!(f, "0")?;
        }
        write!(f, " {} {}", if self.strict { "<" } else { "<=" }, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Atom(LinearAtom),
    Not(Box<Predicate>),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

/// Kleene truth values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    pub fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }

    pub fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, o: Tri) -> Tri {
        self.not().and(o.not()).not()
    }
}

impl Predicate {
    /// Push negations down to the atoms.
    pub fn nnf(&self) -> Predicate {
        self.nnf_signed(false)
    }

    fn nnf_signed(&self, neg: bool) -> Predicate {
        match (self, neg) {
            (Predicate::Atom(a), false) => Predicate::Atom(a.clone()),
            (Predicate::Atom(a), true) => Predicate::Atom(a.negated()),
            (Predicate::Not(p), _) => p.nnf_signed(!neg),
            (Predicate::And(ps), false) | (Predicate::Or(ps), true) => Predicate::And(ps.iter().map(|p| p.nnf_signed(neg)).collect()),
            (Predicate::Or(ps), false) | (Predicate::And(ps), true) => Predicate::Or(ps.iter().map(|p| p.nnf_signed(neg)).collect()),
        }
    }

    /// Evaluate with a caller-supplied verdict per atom.
    pub fn evaluate_with(&self, atom: &mut dyn FnMut(&LinearAtom) -> Tri) -> Tri {
        match self {
            Predicate::Atom(a) => atom(a),
            Predicate::Not(p) => p.evaluate_with(atom).not(),
            Predicate::And(ps) => ps.iter().fold(Tri::True, |acc, p| acc.and(p.evaluate_with(atom))),
            Predicate::Or(ps) => ps.iter().fold(Tri::False, |acc, p| acc.or(p.evaluate_with(atom))),
        }
    }

    /// Interval evaluation over output (and optional input) bounds.
    pub fn evaluate(&self, outputs: &IntervalTensor, inputs: Option<&IntervalTensor>, r: Rounding) -> Tri {
        self.evaluate_with(&mut |a| a.decide(a.enclose(outputs, inputs, r)))
    }

    pub fn holds_at(&self, x: &[f64], y: &[f64]) -> bool {
        self.evaluate_with(&mut |a| if a.holds(x, y) { Tri::True } else { Tri::False }) == Tri::True
    }

    /// Signed slack: positive when the predicate holds, the most violated
    /// atom otherwise. Used to guide counterexample search.
    pub fn margin(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Predicate::Atom(a) => a.rhs - a.lhs(x, y),
            Predicate::Not(p) => -p.margin(x, y),
            Predicate::And(ps) => ps.iter().map(|p| p.margin(x, y)).fold(f64::INFINITY, f64::min),
            Predicate::Or(ps) => ps.iter().map(|p| p.margin(x, y)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn atoms(&self) -> Vec<&LinearAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a LinearAtom>) {
        match self {
            Predicate::Atom(a) => out.push(a),
            Predicate::Not(p) => p.collect_atoms(out),
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.collect_atoms(out)),
        }
    }

    /// Rebuild the tree with each atom replaced in traversal order.
    pub fn map_atoms(&self, f: &mut dyn FnMut(&LinearAtom) -> LinearAtom) -> Predicate {
        match self {
            Predicate::Atom(a) => Predicate::Atom(f(a)),
            Predicate::Not(p) => Predicate::Not(Box::new(p.map_atoms(f))),
            Predicate::And(ps) => Predicate::And(ps.iter().map(|p| p.map_atoms(f)).collect()),
            Predicate::Or(ps) => Predicate::Or(ps.iter().map(|p| p.map_atoms(f)).collect()),
        }
    }

    pub fn uses_inputs(&self) -> bool {
        self.atoms().iter().any(|a| !a.inputs.is_empty())
    }

    /// True when every atom compares two outputs with opposite coefficients
    /// against zero, so the verdict only depends on the output ordering.
    pub fn is_order_only(&self) -> bool {
        self.atoms().iter().all(|a| {
            a.inputs.is_empty() && a.rhs == 0.0 && a.outputs.len() == 2 && a.outputs[0].1 == -a.outputs[1].1 && a.outputs[0].1 != 0.0
        })
    }

    pub fn max_output(&self) -> Option<usize> {
        self.atoms().iter().filter_map(|a| a.max_output()).max()
    }
}

/// How the predicate was stated in the source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Goal {
    /// The predicate must hold on the whole input box.
    Prove,
    /// The file asserted the unsafe region; the predicate is its negation.
    RefuteAssertion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProperty {
    pub input_box: IntervalTensor,
    pub predicate: Predicate,
    pub goal: Goal,
}

impl NormalizedProperty {
    /// Check compatibility with a network of the given sizes.
    pub fn check_sizes(&self, inputs: usize, outputs: usize) -> Result<()> {
        if self.input_box.len() != inputs {
            return Err(Error::Property(format!("property bounds {} inputs, network has {inputs}", self.input_box.len())));
        }
        for a in self.predicate.atoms() {
            if let Some(j) = a.max_output().filter(|&j| j >= outputs) {
                return Err(Error::Property(format!("output y[{j}] out of range for {outputs} outputs")));
            }
            if let Some(&(i, _)) = a.inputs.iter().find(|(i, _)| *i >= inputs) {
                return Err(Error::Property(format!("input x[{i}] out of range for {inputs} inputs")));
            }
        }
        Ok(())
    }
}

/// Assemble a box from per-input bounds, failing on the first missing side.
pub(crate) fn box_from_bounds(lower: &[Option<f64>], upper: &[Option<f64>]) -> Result<IntervalTensor> {
    let n = lower.len().max(upper.len());
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        match (lower.get(i).copied().flatten(), upper.get(i).copied().flatten()) {
            (Some(l), Some(u)) if l.is_finite() && u.is_finite() => {
                if l > u {
                    return Err(Error::Property(format!("empty range for input {i}: [{l}, {u}]")));
                }
                lo.push(l);
                hi.push(u);
            }
            _ => return Err(Error::Property(format!("unbounded input {i}"))),
        }
    }
    if n == 0 {
        return Err(Error::Property("no input bounds".into()));
    }
    IntervalTensor::from_bounds(lo, hi)
}
