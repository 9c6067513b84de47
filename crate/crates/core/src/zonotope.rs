//! Zonotopes: affine forms over shared noise symbols in `[-1, 1]`.

use ndarray::{s, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{mid_rad, sum_up, ErrorSum, Interval, IntervalTensor, Rounding};
use crate::relax::{self, CastMode, Relax};

/// Globally unique (per analysis) noise-symbol identifier.
pub type SymbolId = u32;

/// Issues fresh noise symbols and constraint identifiers for one analysis.
#[derive(Debug, Clone, Default)]
pub struct Allocator {
    next_symbol: SymbolId,
    next_constraint: u32,
}

impl Allocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn symbol(&mut self) -> SymbolId {
        let s = self.next_symbol;
        self.next_symbol += 1;
        s
    }

    pub fn symbols(&mut self, n: usize) -> Vec<SymbolId> {
        (0..n).map(|_| self.symbol()).collect()
    }

    pub fn constraint(&mut self) -> u32 {
        let c = self.next_constraint;
        self.next_constraint += 1;
        c
    }

    pub fn issued_symbols(&self) -> usize {
        self.next_symbol as usize
    }
}

/// `x_i = sum_j generators[i, j] * eps_{symbols[j]} + center[i] + [-error[i], error[i]]`.
///
/// `error` collects floating-point rounding committed while building the
/// form; it stays zero in fast mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    pub center: Vec<f64>,
    pub generators: Array2<f64>,
    pub symbols: Vec<SymbolId>,
    pub error: Vec<f64>,
}

/// Sorted union of two sorted symbol lists.
pub(crate) fn merge_symbols(a: &[SymbolId], b: &[SymbolId]) -> Vec<SymbolId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Re-index the columns of `m` (labelled `from`) onto the superset `to`.
pub(crate) fn align_columns(m: &Array2<f64>, from: &[SymbolId], to: &[SymbolId]) -> Array2<f64> {
    if from == to {
        return m.clone();
    }
    let mut out = Array2::zeros((m.nrows(), to.len()));
    let mut k = 0;
    for (j, s) in from.iter().enumerate() {
        while to[k] != *s {
            k += 1;
        }
        out.column_mut(k).assign(&m.column(j));
    }
    out
}

impl Zonotope {
    /// Dimension `d`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Number of noise symbols `m`.
    #[inline]
    pub fn noise_count(&self) -> usize {
        self.symbols.len()
    }

    /// A constant vector, with no symbols.
    pub fn constant(values: Vec<f64>) -> Self {
        let d = values.len();
        Self { center: values, generators: Array2::zeros((d, 0)), symbols: Vec::new(), error: vec![0.0; d] }
    }

    /// One fresh symbol per dimension: `x_i = (u - l)/2 eps_i + (u + l)/2`.
    pub fn from_box(b: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Result<Self> {
        let d = b.len();
        if let Some(i) = (0..d).find(|&i| !b.lower[i].is_finite() || !b.upper[i].is_finite()) {
            return Err(Error::InfiniteBound(i));
        }
        let mut center = Vec::with_capacity(d);
        let mut generators = Array2::zeros((d, d));
        for (i, iv) in b.iter().enumerate() {
            let (mid, rad) = mid_rad(r, iv.lo, iv.hi);
            center.push(mid);
            generators[[i, i]] = rad;
        }
        Ok(Self { center, generators, symbols: alloc.symbols(d), error: vec![0.0; d] })
    }

    /// Bounding box `beta_i -+ (sum_j |alpha_ij| + err_i)`.
    pub fn concretize(&self, r: Rounding) -> IntervalTensor {
        let d = self.dim();
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        for i in 0..d {
            let rad = self.radius(i, r);
            lower.push(r.sub_lo(self.center[i], rad));
            upper.push(r.add_hi(self.center[i], rad));
        }
        IntervalTensor { shape: vec![d], lower, upper }
    }

    /// Total deviation `sum_j |alpha_ij| + err_i` of dimension `i`.
    pub fn radius(&self, i: usize, r: Rounding) -> f64 {
        let row = self.generators.row(i);
        r.add_hi(sum_up(r, row.iter().map(|v| v.abs())), self.error[i])
    }

    /// Value at a noise assignment given per column (same order as `symbols`).
    pub fn eval(&self, eps: &[f64]) -> Vec<f64> {
        let mut out = self.center.clone();
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.generators.row(i).dot(&ArrayView1::from(eps));
        }
        out
    }

    /// Column of coefficients for `symbol`, if present.
    pub fn coefficients(&self, symbol: SymbolId) -> Option<ArrayView1<'_, f64>> {
        self.symbols.binary_search(&symbol).ok().map(|k| self.generators.column(k))
    }

    /// Generators re-indexed onto the superset `to`.
    pub fn aligned(&self, to: &[SymbolId]) -> Array2<f64> {
        align_columns(&self.generators, &self.symbols, to)
    }

    /// `W x + c`. Exact up to the tracked rounding error.
    pub fn affine(&self, w: &Array2<f64>, c: Option<&[f64]>, r: Rounding) -> Result<Self> {
        let (rows, cols) = w.dim();
        if cols != self.dim() {
            return Err(Error::Dimension { expected: cols, found: self.dim() });
        }
        if let Some(c) = c {
            if c.len() != rows {
                return Err(Error::Dimension { expected: rows, found: c.len() });
            }
        }
        let m = self.noise_count();
        match r {
            Rounding::Fast => {
                let generators = w.dot(&self.generators);
                let mut center = w.dot(&ArrayView1::from(&self.center)).to_vec();
                if let Some(c) = c {
                    center.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                }
                Ok(Self { center, generators, symbols: self.symbols.clone(), error: vec![0.0; rows] })
            }
            Rounding::Sound => {
                let mut generators = Array2::zeros((rows, m));
                let mut center = Vec::with_capacity(rows);
                let mut error = Vec::with_capacity(rows);
                let mut acc = vec![ErrorSum::new(r); m];
                for i in 0..rows {
                    acc.iter_mut().for_each(|a| *a = ErrorSum::new(r));
                    let mut ctr = ErrorSum::new(r);
                    for (j, &wij) in w.row(i).iter().enumerate() {
                        if wij == 0.0 {
                            continue;
                        }
                        ctr.add_product(wij, self.center[j]);
                        ctr.add_radius(r.mul_hi(wij.abs(), self.error[j]));
                        for (a, &g) in acc.iter_mut().zip(self.generators.row(j)) {
                            a.add_product(wij, g);
                        }
                    }
                    if let Some(c) = c {
                        ctr.add(c[i]);
                    }
                    let mut row = generators.row_mut(i);
                    let mut err = ctr.error();
                    for (k, a) in acc.iter().enumerate() {
                        row[k] = a.value();
                        err = r.add_hi(err, a.error());
                    }
                    center.push(ctr.value());
                    error.push(err);
                }
                Ok(Self { center, generators, symbols: self.symbols.clone(), error })
            }
        }
    }

    /// `x + c` for a constant vector.
    pub fn translate(&self, c: &[f64], r: Rounding) -> Result<Self> {
        if c.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: c.len() });
        }
        let mut out = self.clone();
        for i in 0..self.dim() {
            let mut acc = ErrorSum::new(r);
            acc.add(self.center[i]);
            acc.add(c[i]);
            out.center[i] = acc.value();
            out.error[i] = r.add_hi(out.error[i], acc.error());
        }
        Ok(out)
    }

    /// Elementwise sum of two zonotopes over the union of their symbols.
    pub fn add(&self, other: &Zonotope, r: Rounding) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        let symbols = merge_symbols(&self.symbols, &other.symbols);
        let a = self.aligned(&symbols);
        let b = other.aligned(&symbols);
        let d = self.dim();
        let mut generators = Array2::zeros((d, symbols.len()));
        let mut center = Vec::with_capacity(d);
        let mut error = Vec::with_capacity(d);
        for i in 0..d {
            let mut ctr = ErrorSum::new(r);
            ctr.add(self.center[i]);
            ctr.add(other.center[i]);
            let mut err = r.add_hi(r.add_hi(self.error[i], other.error[i]), ctr.error());
            for k in 0..symbols.len() {
                let mut g = ErrorSum::new(r);
                g.add(a[[i, k]]);
                g.add(b[[i, k]]);
                generators[[i, k]] = g.value();
                err = r.add_hi(err, g.error());
            }
            center.push(ctr.value());
            error.push(err);
        }
        Ok(Self { center, generators, symbols, error })
    }

    pub fn neg(&self) -> Self {
        Self {
            center: self.center.iter().map(|v| -v).collect(),
            generators: -&self.generators,
            symbols: self.symbols.clone(),
            error: self.error.clone(),
        }
    }

    /// Rows picked by `indices`, in that order. Used for reshapes,
    /// transposes and slicing.
    pub fn select(&self, indices: &[usize]) -> Self {
        let generators = self.generators.select(Axis(0), indices);
        Self {
            center: indices.iter().map(|&i| self.center[i]).collect(),
            generators,
            symbols: self.symbols.clone(),
            error: indices.iter().map(|&i| self.error[i]).collect(),
        }
    }

    /// Stack zonotopes vertically over the union of their symbols.
    pub fn concat(parts: &[&Zonotope]) -> Self {
        let symbols = parts.iter().fold(Vec::new(), |acc, z| merge_symbols(&acc, &z.symbols));
        let d: usize = parts.iter().map(|z| z.dim()).sum();
        let mut generators = Array2::zeros((d, symbols.len()));
        let mut center = Vec::with_capacity(d);
        let mut error = Vec::with_capacity(d);
        let mut row = 0;
        for z in parts {
            let a = z.aligned(&symbols);
            generators.slice_mut(s![row..row + z.dim(), ..]).assign(&a);
            center.extend_from_slice(&z.center);
            error.extend_from_slice(&z.error);
            row += z.dim();
        }
        Self { center, generators, symbols, error }
    }

    /// Apply one relaxation per dimension. Linear relaxations with a
    /// nonzero residual add one fresh symbol each.
    pub fn apply_relax(&self, relax: &[Relax], alloc: &mut Allocator, r: Rounding) -> Result<Self> {
        if relax.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: relax.len() });
        }
        let d = self.dim();
        let m = self.noise_count();
        let fresh_rows: Vec<usize> = (0..d).filter(|&i| relax[i].needs_symbol()).collect();
        let mut generators = Array2::zeros((d, m + fresh_rows.len()));
        let mut center = self.center.clone();
        let mut error = self.error.clone();
        let mut symbols = self.symbols.clone();
        let mut next_col = m;
        for (i, rx) in relax.iter().enumerate() {
            match *rx {
                Relax::Identity => {
                    generators.slice_mut(s![i, ..m]).assign(&self.generators.row(i));
                }
                Relax::Constant(iv) => {
                    let (mid, rad) = mid_rad(r, iv.lo, iv.hi);
                    center[i] = mid;
                    error[i] = rad;
                }
                Relax::Linear { slope, lo, hi } => {
                    let (mid, rad) = mid_rad(r, lo, hi);
                    let mut err = r.mul_hi(slope.abs(), self.error[i]);
                    let mut ctr = ErrorSum::new(r);
                    ctr.add_product(slope, self.center[i]);
                    ctr.add(mid);
                    center[i] = ctr.value();
                    err = r.add_hi(err, ctr.error());
                    for k in 0..m {
                        let mut g = ErrorSum::new(r);
                        g.add_product(slope, self.generators[[i, k]]);
                        generators[[i, k]] = g.value();
                        err = r.add_hi(err, g.error());
                    }
                    if rx.needs_symbol() {
                        generators[[i, next_col]] = rad;
                        next_col += 1;
                    } else {
                        err = r.add_hi(err, rad);
                    }
                    error[i] = err;
                }
            }
        }
        symbols.extend(alloc.symbols(fresh_rows.len()));
        Ok(Self { center, generators, symbols, error })
    }

    /// Merge the least important symbols (by column L1 norm) into one fresh
    /// symbol per affected dimension so that at most `max_symbols` columns
    /// remain, not counting `protected` symbols which are always kept.
    pub fn reduce(&self, max_symbols: usize, protected: &dyn Fn(SymbolId) -> bool, alloc: &mut Allocator, r: Rounding) -> Self {
        let m = self.noise_count();
        if m <= max_symbols {
            return self.clone();
        }
        let d = self.dim();
        let n_protected = self.symbols.iter().filter(|&&s| protected(s)).count();
        let budget = max_symbols.saturating_sub(d + n_protected);
        let mut candidates: Vec<(f64, usize)> = (0..m)
            .filter(|&k| !protected(self.symbols[k]))
            .map(|k| (self.generators.column(k).iter().map(|v| v.abs()).sum::<f64>(), k))
            .collect();
        if candidates.len() <= budget {
            return self.clone();
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut keep = vec![false; m];
        for k in 0..m {
            keep[k] = protected(self.symbols[k]);
        }
        for &(_, k) in candidates.iter().take(budget) {
            keep[k] = true;
        }
        let kept: Vec<usize> = (0..m).filter(|&k| keep[k]).collect();
        let merged: Vec<usize> = (0..m).filter(|&k| !keep[k]).collect();
        let radii: Vec<f64> = (0..d).map(|i| sum_up(r, merged.iter().map(|&k| self.generators[[i, k]].abs()))).collect();
        let fresh_rows: Vec<usize> = (0..d).filter(|&i| radii[i] > 0.0).collect();
        let mut generators = Array2::zeros((d, kept.len() + fresh_rows.len()));
        for (c, &k) in kept.iter().enumerate() {
            generators.column_mut(c).assign(&self.generators.column(k));
        }
        for (c, &i) in fresh_rows.iter().enumerate() {
            generators[[i, kept.len() + c]] = radii[i];
        }
        let mut symbols: Vec<SymbolId> = kept.iter().map(|&k| self.symbols[k]).collect();
        symbols.extend(alloc.symbols(fresh_rows.len()));
        let mut out = Self { center: self.center.clone(), generators, symbols, error: self.error.clone() };
        for i in (0..d).filter(|_| r.is_sound()) {
            let target = self.radius(i, r);
            let mut now = out.radius(i, r);
            while now < target {
                out.error[i] = r.add_hi(out.error[i], r.sub_hi(target, now).max(f64::MIN_POSITIVE));
                now = out.radius(i, r);
            }
        }
        out
    }

    /// Drop columns that are identically zero.
    pub fn prune(&self, keep: &dyn Fn(SymbolId) -> bool) -> Self {
        let cols: Vec<usize> = (0..self.noise_count())
            .filter(|&k| keep(self.symbols[k]) || self.generators.column(k).iter().any(|&v| v != 0.0))
            .collect();
        if cols.len() == self.noise_count() {
            return self.clone();
        }
        Self {
            center: self.center.clone(),
            generators: self.generators.select(Axis(1), &cols),
            symbols: cols.iter().map(|&k| self.symbols[k]).collect(),
            error: self.error.clone(),
        }
    }

    fn relax_with(
        &self,
        bounds: &IntervalTensor,
        alloc: &mut Allocator,
        r: Rounding,
        f: impl Fn(f64, f64) -> Result<Relax>,
    ) -> Result<Self> {
        if bounds.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: bounds.len() });
        }
        let relax = bounds.iter().map(|b| f(b.lo, b.hi)).collect::<Result<Vec<_>>>()?;
        self.apply_relax(&relax, alloc, r)
    }

    /// ReLU with per-dimension pre-activation bounds.
    pub fn relu(&self, bounds: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Result<Self> {
        self.relax_with(bounds, alloc, r, |l, u| relax::relu(l, u, r))
    }

    pub fn sigmoid(&self, bounds: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Result<Self> {
        self.relax_with(bounds, alloc, r, |l, u| relax::sigmoid(l, u, r))
    }

    pub fn tanh(&self, bounds: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Result<Self> {
        self.relax_with(bounds, alloc, r, |l, u| relax::tanh(l, u, r))
    }

    pub fn cast(&self, mode: CastMode, bounds: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Result<Self> {
        self.relax_with(bounds, alloc, r, |l, u| relax::cast(mode, l, u))
    }

    /// Enclosure of dimension `i`.
    pub fn bound(&self, i: usize, r: Rounding) -> Interval {
        let rad = self.radius(i, r);
        Interval { lo: r.sub_lo(self.center[i], rad), hi: r.add_hi(self.center[i], rad) }
    }
}
