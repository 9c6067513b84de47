//! Zonotopes whose noise symbols satisfy shared linear inequalities
//! `A eps + b >= 0`, concretized through the Lagrangian dual.

use std::collections::HashMap;

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{sum_up, ErrorSum, IntervalTensor, Rounding};
use crate::lp::{Cmp, Lp, LpOutcome};
use crate::relax::{self, Relax};
use crate::zonotope::{align_columns, merge_symbols, Allocator, SymbolId, Zonotope};

/// Sign imposed on a ReLU pre-activation by a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    /// `x <= 0`, output forced to zero.
    Neg,
    /// `x >= 0`, output equals input.
    Pos,
}

/// A neuron addressed by the graph node of its activation and its flat index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronRef {
    pub node: usize,
    pub index: usize,
}

/// Pre-activation forms recorded during a forward pass, keyed by the node of
/// the activation they feed.
pub type PreActivations = HashMap<usize, Zonotope>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualMethod {
    /// Projected Adam ascent on the multipliers.
    #[default]
    Gradient,
    /// Multipliers proposed by the simplex solver, then certified.
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualConfig {
    pub method: DualMethod,
    pub iterations: usize,
    pub step: f64,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self { method: DualMethod::Gradient, iterations: 100, step: 0.1 }
    }
}

/// Result of a dual concretization.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBounds {
    pub bounds: IntervalTensor,
    /// The feasible noise region is provably empty.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedZonotope {
    pub body: Zonotope,
    /// `K x m`, columns aligned with `body.symbols`.
    pub a: Array2<f64>,
    pub b: Vec<f64>,
    /// Identifiers of the constraint rows, used to merge shared constraints.
    pub ids: Vec<u32>,
}

impl ConstrainedZonotope {
    pub fn from_zonotope(body: Zonotope) -> Self {
        let m = body.noise_count();
        Self { body, a: Array2::zeros((0, m)), b: Vec::new(), ids: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    /// Number of constraints `K`.
    pub fn constraint_count(&self) -> usize {
        self.b.len()
    }

    /// Plain zonotope bounds, ignoring the constraints.
    pub fn concretize(&self, r: Rounding) -> IntervalTensor {
        self.body.concretize(r)
    }

    /// Replace the body, re-aligning the constraint columns to its symbols.
    pub fn with_body(&self, body: Zonotope) -> Self {
        let a = align_columns(&self.a, &self.body.symbols, &body.symbols);
        Self { body, a, b: self.b.clone(), ids: self.ids.clone() }
    }

    /// Symbols that appear in some constraint.
    pub fn constrained_symbols(&self) -> Vec<SymbolId> {
        (0..self.body.noise_count())
            .filter(|&k| self.a.column(k).iter().any(|&v| v != 0.0))
            .map(|k| self.body.symbols[k])
            .collect()
    }

    pub fn affine(&self, w: &Array2<f64>, c: Option<&[f64]>, r: Rounding) -> Result<Self> {
        Ok(self.with_body(self.body.affine(w, c, r)?))
    }

    pub fn translate(&self, c: &[f64], r: Rounding) -> Result<Self> {
        Ok(self.with_body(self.body.translate(c, r)?))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        self.with_body(self.body.select(indices))
    }

    /// Union of constraint sets over a common symbol list.
    fn merged_constraints(parts: &[&ConstrainedZonotope], symbols: &[SymbolId]) -> (Array2<f64>, Vec<f64>, Vec<u32>) {
        let mut rows: Vec<(u32, Vec<f64>, f64)> = Vec::new();
        for p in parts {
            let aligned = align_columns(&p.a, &p.body.symbols, symbols);
            for (k, &id) in p.ids.iter().enumerate() {
                if !rows.iter().any(|(i, _, _)| *i == id) {
                    rows.push((id, aligned.row(k).to_vec(), p.b[k]));
                }
            }
        }
        rows.sort_by_key(|r| r.0);
        let mut a = Array2::zeros((rows.len(), symbols.len()));
        for (k, (_, row, _)) in rows.iter().enumerate() {
            a.row_mut(k).assign(&ndarray::ArrayView1::from(row));
        }
        (a, rows.iter().map(|r| r.2).collect(), rows.iter().map(|r| r.0).collect())
    }

    pub fn add(&self, other: &ConstrainedZonotope, r: Rounding) -> Result<Self> {
        let body = self.body.add(&other.body, r)?;
        let (a, b, ids) = Self::merged_constraints(&[self, other], &body.symbols);
        Ok(Self { body, a, b, ids })
    }

    pub fn concat(parts: &[&ConstrainedZonotope]) -> Self {
        let bodies: Vec<&Zonotope> = parts.iter().map(|p| &p.body).collect();
        let body = Zonotope::concat(&bodies);
        let (a, b, ids) = Self::merged_constraints(parts, &body.symbols);
        Self { body, a, b, ids }
    }

    /// Append `coeffs . eps + offset >= 0`, where `coeffs` is aligned with
    /// `self.body.symbols`.
    pub(crate) fn push_constraint(&mut self, coeffs: &[f64], offset: f64, alloc: &mut Allocator) {
        let mut a = Array2::zeros((self.a.nrows() + 1, self.body.noise_count()));
        a.slice_mut(s![..self.a.nrows(), ..]).assign(&self.a);
        a.row_mut(self.a.nrows()).assign(&ndarray::ArrayView1::from(coeffs));
        self.a = a;
        self.b.push(offset);
        self.ids.push(alloc.constraint());
    }

    /// Coefficients and offset of `sign * (p_i - q_i) >= 0` relaxed by every
    /// rounding error involved, where `q` may be absent (treated as zero).
    fn difference_row(p: &Zonotope, q: Option<&Zonotope>, i: usize, symbols: &[SymbolId], r: Rounding) -> (Vec<f64>, f64) {
        let pa = align_columns(&p.generators.slice(s![i..i + 1, ..]).to_owned(), &p.symbols, symbols);
        let qa = q.map(|q| align_columns(&q.generators.slice(s![i..i + 1, ..]).to_owned(), &q.symbols, symbols));
        let mut coeffs = Vec::with_capacity(symbols.len());
        let mut slack = r.add_hi(p.error[i], q.map_or(0.0, |q| q.error[i]));
        for k in 0..symbols.len() {
            let mut acc = ErrorSum::new(r);
            acc.add(pa[[0, k]]);
            if let Some(qa) = &qa {
                acc.add(-qa[[0, k]]);
            }
            coeffs.push(acc.value());
            slack = r.add_hi(slack, acc.error());
        }
        let mut off = ErrorSum::new(r);
        off.add(p.center[i]);
        if let Some(q) = q {
            off.add(-q.center[i]);
        }
        let offset = r.add_hi(r.add_hi(off.value(), off.error()), slack);
        (coeffs, offset)
    }

    fn negated(row: (Vec<f64>, f64), r: Rounding, p: &Zonotope, i: usize) -> (Vec<f64>, f64) {
        // -x >= 0 with the same slack: -(c eps + beta) + err >= 0.
        let coeffs: Vec<f64> = row.0.iter().map(|v| -v).collect();
        let mut off = ErrorSum::new(r);
        off.add(-p.center[i]);
        let offset = r.add_hi(r.add_hi(off.value(), off.error()), p.error[i]);
        (coeffs, offset)
    }

    /// ReLU with the optional sign splits `splits[i]` per dimension. Unsplit
    /// unstable neurons get the zonotope band plus the constraints `y >= x`
    /// and `y >= 0`; split neurons get an exact body and the sign constraint.
    pub fn relu_with_splits(
        &self,
        bounds: &IntervalTensor,
        splits: &[Option<Sign>],
        alloc: &mut Allocator,
        r: Rounding,
    ) -> Result<Self> {
        let d = self.dim();
        if bounds.len() != d || splits.len() != d {
            return Err(Error::Dimension { expected: d, found: bounds.len().min(splits.len()) });
        }
        let mut rx = Vec::with_capacity(d);
        for (i, b) in bounds.iter().enumerate() {
            rx.push(match splits[i] {
                Some(Sign::Neg) => Relax::Constant(crate::interval::Interval::point(0.0)),
                Some(Sign::Pos) => Relax::Identity,
                None => relax::relu(b.lo, b.hi, r)?,
            });
        }
        let x = &self.body;
        let y = x.apply_relax(&rx, alloc, r)?;
        let mut out = self.with_body(y.clone());
        let symbols = y.symbols.clone();
        for i in 0..d {
            match (splits[i], rx[i]) {
                (Some(Sign::Pos), _) => {
                    let (c, o) = Self::difference_row(x, None, i, &symbols, r);
                    out.push_constraint(&c, o, alloc);
                }
                (Some(Sign::Neg), _) => {
                    let row = Self::difference_row(x, None, i, &symbols, r);
                    let (c, o) = Self::negated(row, r, x, i);
                    out.push_constraint(&c, o, alloc);
                }
                (None, Relax::Linear { .. }) => {
                    let (c, o) = Self::difference_row(&y, Some(x), i, &symbols, r);
                    out.push_constraint(&c, o, alloc);
                    let (c, o) = Self::difference_row(&y, None, i, &symbols, r);
                    out.push_constraint(&c, o, alloc);
                }
                _ => {}
            }
        }
        Ok(out)
    }

    pub fn relu(&self, bounds: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Result<Self> {
        self.relu_with_splits(bounds, &vec![None; self.dim()], alloc, r)
    }

    /// Force the sign of a recorded pre-activation on this ReLU output.
    pub fn add_split_constraint(
        &self,
        store: &PreActivations,
        neuron: NeuronRef,
        sign: Sign,
        alloc: &mut Allocator,
        r: Rounding,
    ) -> Result<Self> {
        let pre = store
            .get(&neuron.node)
            .filter(|z| neuron.index < z.dim())
            .ok_or(Error::UnknownNeuron { node: neuron.node, index: neuron.index })?;
        if pre.dim() != self.dim() {
            return Err(Error::Dimension { expected: pre.dim(), found: self.dim() });
        }
        let i = neuron.index;
        let symbols = merge_symbols(&self.body.symbols, &pre.symbols);
        let mut out = self.with_body(Zonotope { symbols: symbols.clone(), generators: self.body.aligned(&symbols), ..self.body.clone() });
        let pre_row = pre.aligned(&symbols);
        match sign {
            Sign::Neg => {
                out.body.generators.row_mut(i).fill(0.0);
                out.body.center[i] = 0.0;
                out.body.error[i] = 0.0;
            }
            Sign::Pos => {
                out.body.generators.row_mut(i).assign(&pre_row.row(i));
                out.body.center[i] = pre.center[i];
                out.body.error[i] = pre.error[i];
            }
        }
        let row = Self::difference_row(pre, None, i, &symbols, r);
        let (c, o) = match sign {
            Sign::Pos => row,
            Sign::Neg => Self::negated(row, r, pre, i),
        };
        out.push_constraint(&c, o, alloc);
        Ok(out)
    }

    /// Merge low-importance symbols, never touching constrained ones.
    pub fn reduce(&self, max_symbols: usize, protected: &dyn Fn(SymbolId) -> bool, alloc: &mut Allocator, r: Rounding) -> Self {
        let constrained = self.constrained_symbols();
        let keep = |s: SymbolId| protected(s) || constrained.binary_search(&s).is_ok();
        self.with_body(self.body.reduce(max_symbols, &keep, alloc, r))
    }

    /// Sound lower bound of `alpha . eps + beta - err` over the feasible
    /// region, for the multipliers `lambda >= 0`.
    pub fn dual_value(&self, alpha: &[f64], beta: f64, err: f64, lambda: &[f64], r: Rounding) -> f64 {
        let m = alpha.len();
        let mut total = ErrorSum::new(r);
        for (k, &l) in lambda.iter().enumerate() {
            if l > 0.0 {
                total.add_product(l, self.b[k]);
            }
        }
        let lb = r.add_hi(total.value(), total.error());
        let mut abs_terms = Vec::with_capacity(m);
        for j in 0..m {
            let mut v = ErrorSum::new(r);
            v.add(alpha[j]);
            for (k, &l) in lambda.iter().enumerate() {
                if l > 0.0 {
                    v.add_product(-l, self.a[[k, j]]);
                }
            }
            abs_terms.push(r.add_hi(v.value().abs(), v.error()));
        }
        let spread = sum_up(r, abs_terms);
        r.sub_lo(r.sub_lo(r.sub_lo(beta, err), spread), lb)
    }

    /// Plain floating dual objective and a supergradient.
    fn dual_float(&self, alpha: &[f64], lambda: &[f64], grad: &mut [f64]) -> f64 {
        let k_count = lambda.len();
        let mut value = 0.0;
        for k in 0..k_count {
            value -= lambda[k] * self.b[k];
            grad[k] = -self.b[k];
        }
        for (j, &aj) in alpha.iter().enumerate() {
            let mut v = aj;
            for k in 0..k_count {
                v -= lambda[k] * self.a[[k, j]];
            }
            value -= v.abs();
            let sg = if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
            if sg != 0.0 {
                for k in 0..k_count {
                    grad[k] += sg * self.a[[k, j]];
                }
            }
        }
        value
    }

    /// Multipliers found by projected Adam ascent, starting from zero.
    fn ascend(&self, alpha: &[f64], cfg: &DualConfig) -> Vec<f64> {
        let kc = self.constraint_count();
        let mut lambda = vec![0.0; kc];
        let mut grad = vec![0.0; kc];
        let mut m1 = vec![0.0; kc];
        let mut m2 = vec![0.0; kc];
        let (b1, b2, eps) = (0.9, 0.999, 1e-12);
        let mut best = (self.dual_float(alpha, &lambda, &mut grad), lambda.clone());
        for t in 1..=cfg.iterations {
            let lr = cfg.step * (1.0 - (t - 1) as f64 / cfg.iterations as f64);
            for k in 0..kc {
                m1[k] = b1 * m1[k] + (1.0 - b1) * grad[k];
                m2[k] = b2 * m2[k] + (1.0 - b2) * grad[k] * grad[k];
                let mh = m1[k] / (1.0 - f64::powi(b1, t as i32));
                let vh = m2[k] / (1.0 - f64::powi(b2, t as i32));
                lambda[k] = (lambda[k] + lr * mh / (vh.sqrt() + eps)).max(0.0);
            }
            let v = self.dual_float(alpha, &lambda, &mut grad);
            if v > best.0 {
                best = (v, lambda.clone());
            }
        }
        best.1
    }

    /// LP over the feasible region: `min alpha . eps` with `eps = z - 1`,
    /// `z in [0, 2]`.
    fn primal_lp(&self, alpha: &[f64]) -> Lp {
        let m = alpha.len();
        let mut lp = Lp::new(alpha.to_vec());
        for k in 0..self.constraint_count() {
            let row = self.a.row(k).to_vec();
            let rhs = row.iter().sum::<f64>() - self.b[k];
            lp.row(row, Cmp::Ge, rhs);
        }
        for j in 0..m {
            let mut row = vec![0.0; m];
            row[j] = 1.0;
            lp.row(row, Cmp::Le, 2.0);
        }
        lp
    }

    /// Minimizer of `alpha . eps` over the feasible region, as proposed by the
    /// simplex solver (not certified).
    pub fn lp_minimizer(&self, alpha: &[f64]) -> Option<Vec<f64>> {
        match self.primal_lp(alpha).solve() {
            LpOutcome::Optimal { x, .. } => Some(x.iter().map(|z| (z - 1.0).clamp(-1.0, 1.0)).collect()),
            _ => None,
        }
    }

    /// Best certified lower bound of dimension `i` (negated when `upper`).
    fn bound_one(&self, i: usize, upper: bool, cfg: &DualConfig, r: Rounding) -> f64 {
        let sign = if upper { -1.0 } else { 1.0 };
        let alpha: Vec<f64> = self.body.generators.row(i).iter().map(|v| sign * v).collect();
        let beta = sign * self.body.center[i];
        let err = self.body.error[i];
        let zero = self.dual_value(&alpha, beta, err, &[], r);
        if self.constraint_count() == 0 {
            return zero;
        }
        let lambda = match cfg.method {
            DualMethod::Gradient => Some(self.ascend(&alpha, cfg)),
            DualMethod::Simplex => match self.primal_lp(&alpha).solve() {
                LpOutcome::Optimal { duals, .. } => {
                    Some(duals[..self.constraint_count()].iter().map(|v| v.max(0.0)).collect())
                }
                LpOutcome::Infeasible => None,
                _ => Some(self.ascend(&alpha, cfg)),
            },
        };
        match lambda {
            Some(l) => zero.max(self.dual_value(&alpha, beta, err, &l, r)),
            None => zero,
        }
    }

    /// Multipliers proving the feasible region empty, certified soundly.
    pub fn certify_empty(&self, r: Rounding) -> bool {
        let kc = self.constraint_count();
        if kc == 0 {
            return false;
        }
        let m = self.body.noise_count();
        // Variables: lambda (K), t (m). min sum t + b.lambda, t >= |A^T lambda|, sum lambda = 1.
        let mut obj = self.b.clone();
        obj.extend(std::iter::repeat_n(1.0, m));
        let mut lp = Lp::new(obj);
        for j in 0..m {
            let mut plus = vec![0.0; kc + m];
            let mut minus = vec![0.0; kc + m];
            for k in 0..kc {
                plus[k] = -self.a[[k, j]];
                minus[k] = self.a[[k, j]];
            }
            plus[kc + j] = 1.0;
            minus[kc + j] = 1.0;
            lp.row(plus, Cmp::Ge, 0.0);
            lp.row(minus, Cmp::Ge, 0.0);
        }
        let mut norm = vec![1.0; kc];
        norm.extend(std::iter::repeat_n(0.0, m));
        lp.row(norm, Cmp::Eq, 1.0);
        match lp.solve() {
            LpOutcome::Optimal { x, value, .. } if value < 0.0 => {
                let lambda: Vec<f64> = x[..kc].iter().map(|v| v.max(0.0)).collect();
                // max over the box of lambda.(A eps + b) must be negative.
                let zeros = vec![0.0; m];
                self.dual_value(&zeros, 0.0, 0.0, &lambda, r) > 0.0
            }
            _ => false,
        }
    }

    /// Per-dimension bounds over the feasible region.
    pub fn concretize_dual(&self, cfg: &DualConfig, r: Rounding) -> DualBounds {
        let d = self.dim();
        let pairs: Vec<(f64, f64)> = (0..d)
            .into_par_iter()
            .map(|i| (self.bound_one(i, false, cfg, r), -self.bound_one(i, true, cfg, r)))
            .collect();
        let plain = self.body.concretize(r);
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        let mut empty = false;
        for (i, (lo, hi)) in pairs.into_iter().enumerate() {
            let lo = lo.max(plain.lower[i]);
            let hi = hi.min(plain.upper[i]);
            let tol = if r.is_sound() { 0.0 } else { 1e-9 * (1.0 + lo.abs().max(hi.abs())) };
            if lo > hi + tol {
                empty = true;
            }
            lower.push(lo);
            upper.push(hi.max(lo));
        }
        if !empty && cfg.method == DualMethod::Simplex && self.constraint_count() > 0 {
            empty = self.certify_empty(r);
        }
        DualBounds { bounds: IntervalTensor { shape: vec![d], lower, upper }, empty }
    }

    /// Drop all-zero columns that no constraint references.
    pub fn prune(&self) -> Self {
        let used: Vec<usize> = (0..self.body.noise_count())
            .filter(|&k| {
                self.body.generators.column(k).iter().any(|&v| v != 0.0) || self.a.column(k).iter().any(|&v| v != 0.0)
            })
            .collect();
        if used.len() == self.body.noise_count() {
            return self.clone();
        }
        let body = Zonotope {
            center: self.body.center.clone(),
            generators: self.body.generators.select(Axis(1), &used),
            symbols: used.iter().map(|&k| self.body.symbols[k]).collect(),
            error: self.body.error.clone(),
        };
        Self { body, a: self.a.select(Axis(1), &used), b: self.b.clone(), ids: self.ids.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const S: Rounding = Rounding::Sound;

    fn unit() -> (ConstrainedZonotope, Allocator) {
        let mut alloc = Allocator::new();
        let b = IntervalTensor::from_bounds(vec![-1.0], vec![1.0]).unwrap();
        (ConstrainedZonotope::from_zonotope(Zonotope::from_box(&b, &mut alloc, S).unwrap()), alloc)
    }

    #[test]
    fn no_constraints_matches_zonotope() {
        let (cz, _) = unit();
        let d = cz.concretize_dual(&DualConfig::default(), S);
        assert_eq!(d.bounds, cz.concretize(S));
        assert!(!d.empty);
    }

    #[test]
    fn single_halfspace() {
        let (mut cz, mut alloc) = unit();
        cz.push_constraint(&[1.0], 0.0, &mut alloc);
        for method in [DualMethod::Gradient, DualMethod::Simplex] {
            let cfg = DualConfig { method, ..Default::default() };
            let d = cz.concretize_dual(&cfg, S);
            assert!(d.bounds.lower[0] <= 0.0 && d.bounds.lower[0] > -1e-3, "{method:?}: {:?}", d.bounds);
            assert_eq!(d.bounds.upper[0], 1.0);
        }
        let zero = DualConfig { iterations: 0, ..Default::default() };
        assert_eq!(cz.concretize_dual(&zero, S).bounds.lower[0], -1.0);
    }

    #[test]
    fn relu_adds_two_constraints_per_unstable_neuron() {
        let mut alloc = Allocator::new();
        let b = IntervalTensor::from_bounds(vec![-1.0, 1.0, -2.0], vec![1.0, 2.0, 3.0]).unwrap();
        let cz = ConstrainedZonotope::from_zonotope(Zonotope::from_box(&b, &mut alloc, S).unwrap());
        let y = cz.relu(&b, &mut alloc, S).unwrap();
        assert_eq!(y.constraint_count(), 4);
        let cfg = DualConfig { method: DualMethod::Simplex, ..Default::default() };
        let d = y.concretize_dual(&cfg, S);
        assert!(d.bounds.lower[0] >= -1e-9 && d.bounds.lower[2] >= -1e-9);
    }

    #[test]
    fn contradictory_splits_are_empty() {
        let (cz, mut alloc) = unit();
        let mut store = PreActivations::new();
        store.insert(7, cz.body.clone());
        let n = NeuronRef { node: 7, index: 0 };
        let neg = cz.add_split_constraint(&store, n, Sign::Neg, &mut alloc, S).unwrap();
        let both = neg.add_split_constraint(&store, n, Sign::Pos, &mut alloc, S).unwrap();
        // x <= 0 and x >= 0 leave the single point x = 0; shift to make it empty.
        let mut shifted = both.clone();
        shifted.b[1] -= 0.5;
        let cfg = DualConfig { method: DualMethod::Simplex, ..Default::default() };
        assert!(!both.concretize_dual(&cfg, S).empty);
        assert!(shifted.concretize_dual(&cfg, S).empty);
        assert!(shifted.concretize_dual(&DualConfig::default(), S).empty || shifted.certify_empty(S));
        let bad = NeuronRef { node: 3, index: 0 };
        assert!(matches!(cz.add_split_constraint(&store, bad, Sign::Neg, &mut alloc, S), Err(Error::UnknownNeuron { .. })));
    }

    #[test]
    fn neg_split_restricts_region() {
        let (cz, mut alloc) = unit();
        let b = cz.concretize(S);
        let y = cz.relu_with_splits(&b, &[Some(Sign::Neg)], &mut alloc, S).unwrap();
        assert_eq!(y.body.concretize(S).upper[0], 0.0);
        let probe = ConstrainedZonotope { body: cz.body.clone(), ..y.clone() };
        let cfg = DualConfig { method: DualMethod::Simplex, ..Default::default() };
        let d = probe.concretize_dual(&cfg, S);
        assert_eq!((d.bounds.lower[0], d.bounds.upper[0]), (-1.0, 0.0));
    }

    #[test]
    fn add_merges_shared_constraints() {
        let (mut cz, mut alloc) = unit();
        cz.push_constraint(&[1.0], 0.5, &mut alloc);
        let twice = cz.add(&cz, S).unwrap();
        assert_eq!(twice.constraint_count(), 1);
        assert_eq!(twice.body.generators, array![[2.0]]);
    }
}
