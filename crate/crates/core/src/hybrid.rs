//! Hybrid zonotopes: unions of constrained zonotopes indexed by binary noise
//! symbols in `{-1, 1}`, with equality constraints on the noise.

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constrained::{ConstrainedZonotope, DualBounds, DualConfig, DualMethod};
use crate::error::{Error, Result};
use crate::interval::{ErrorSum, IntervalTensor, Rounding};
use crate::zonotope::{align_columns, merge_symbols, Allocator, SymbolId, Zonotope};

/// Default bound on the number of binary symbols.
pub const DEFAULT_BINARY_LIMIT: usize = 16;

/// `x = C eps_c + G eps_b + center (+- error)` subject to
/// `|eq_a eps_c + eq_b eps_b + eq_c| <= eq_slack` row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridZonotope {
    pub center: Vec<f64>,
    pub continuous: Array2<f64>,
    pub symbols: Vec<SymbolId>,
    pub binary: Array2<f64>,
    pub binary_symbols: Vec<SymbolId>,
    pub error: Vec<f64>,
    pub eq_a: Array2<f64>,
    pub eq_b: Array2<f64>,
    pub eq_c: Vec<f64>,
    pub eq_slack: Vec<f64>,
    pub eq_ids: Vec<u32>,
    /// Largest admissible number of binary symbols.
    pub limit: usize,
}

/// Resources added by one exact ReLU layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReluBudget {
    pub continuous: usize,
    pub binary: usize,
    pub constraints: usize,
}

impl HybridZonotope {
    pub fn from_zonotope(z: &Zonotope, limit: usize) -> Self {
        let d = z.dim();
        Self {
            center: z.center.clone(),
            continuous: z.generators.clone(),
            symbols: z.symbols.clone(),
            binary: Array2::zeros((d, 0)),
            binary_symbols: Vec::new(),
            error: z.error.clone(),
            eq_a: Array2::zeros((0, z.noise_count())),
            eq_b: Array2::zeros((0, 0)),
            eq_c: Vec::new(),
            eq_slack: Vec::new(),
            eq_ids: Vec::new(),
            limit,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn binary_count(&self) -> usize {
        self.binary_symbols.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.eq_c.len()
    }

    /// Continuous part as a zonotope, binary generators dropped.
    pub fn continuous_part(&self) -> Zonotope {
        Zonotope {
            center: self.center.clone(),
            generators: self.continuous.clone(),
            symbols: self.symbols.clone(),
            error: self.error.clone(),
        }
    }

    /// The set as a zonotope over continuous and binary symbols jointly,
    /// relaxing binaries to `[-1, 1]`.
    pub fn relaxed(&self) -> Zonotope {
        let symbols = merge_symbols(&self.symbols, &self.binary_symbols);
        let mut g = align_columns(&self.continuous, &self.symbols, &symbols);
        let b = align_columns(&self.binary, &self.binary_symbols, &symbols);
        g += &b;
        Zonotope { center: self.center.clone(), generators: g, symbols, error: self.error.clone() }
    }

    /// Bounds with binaries relaxed and constraints ignored.
    pub fn concretize_relaxed(&self, r: Rounding) -> IntervalTensor {
        self.relaxed().concretize(r)
    }

    pub fn affine(&self, w: &Array2<f64>, c: Option<&[f64]>, r: Rounding) -> Result<Self> {
        let z = self.relaxed().affine(w, c, r)?;
        let mut out = self.with_relaxed(z);
        out.limit = self.limit;
        Ok(out)
    }

    /// Split a zonotope over the joint symbol list back into continuous and
    /// binary parts, keeping the constraints of `self`.
    fn with_relaxed(&self, z: Zonotope) -> Self {
        let is_binary = |s: &SymbolId| self.binary_symbols.binary_search(s).is_ok();
        let cont: Vec<SymbolId> = z.symbols.iter().copied().filter(|s| !is_binary(s)).collect();
        let symbols = merge_symbols(&cont, &self.symbols);
        let cont_idx: Vec<usize> = (0..z.symbols.len()).filter(|&k| !is_binary(&z.symbols[k])).collect();
        let bin_idx: Vec<usize> = (0..z.symbols.len()).filter(|&k| is_binary(&z.symbols[k])).collect();
        let cpart = z.generators.select(ndarray::Axis(1), &cont_idx);
        let bpart = z.generators.select(ndarray::Axis(1), &bin_idx);
        let bsyms: Vec<SymbolId> = bin_idx.iter().map(|&k| z.symbols[k]).collect();
        Self {
            center: z.center,
            continuous: align_columns(&cpart, &cont, &symbols),
            binary: align_columns(&bpart, &bsyms, &self.binary_symbols),
            error: z.error,
            eq_a: align_columns(&self.eq_a, &self.symbols, &symbols),
            symbols,
            ..self.clone()
        }
    }

    pub fn translate(&self, c: &[f64], r: Rounding) -> Result<Self> {
        Ok(self.with_relaxed(self.relaxed().translate(c, r)?))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        self.with_relaxed(self.relaxed().select(indices))
    }

    fn merged(parts: &[&HybridZonotope], body: Zonotope) -> Self {
        let symbols_b = parts.iter().fold(Vec::new(), |acc, p| merge_symbols(&acc, &p.binary_symbols));
        let symbols_c = parts.iter().fold(Vec::new(), |acc, p| merge_symbols(&acc, &p.symbols));
        let mut rows: Vec<(u32, Vec<f64>, Vec<f64>, f64, f64)> = Vec::new();
        for p in parts {
            let a = align_columns(&p.eq_a, &p.symbols, &symbols_c);
            let b = align_columns(&p.eq_b, &p.binary_symbols, &symbols_b);
            for (k, &id) in p.eq_ids.iter().enumerate() {
                if !rows.iter().any(|r| r.0 == id) {
                    rows.push((id, a.row(k).to_vec(), b.row(k).to_vec(), p.eq_c[k], p.eq_slack[k]));
                }
            }
        }
        rows.sort_by_key(|r| r.0);
        let mut eq_a = Array2::zeros((rows.len(), symbols_c.len()));
        let mut eq_b = Array2::zeros((rows.len(), symbols_b.len()));
        for (k, row) in rows.iter().enumerate() {
            eq_a.row_mut(k).assign(&ndarray::ArrayView1::from(&row.1));
            eq_b.row_mut(k).assign(&ndarray::ArrayView1::from(&row.2));
        }
        let template = Self {
            center: Vec::new(),
            continuous: Array2::zeros((0, symbols_c.len())),
            symbols: symbols_c,
            binary: Array2::zeros((0, symbols_b.len())),
            binary_symbols: symbols_b,
            error: Vec::new(),
            eq_a,
            eq_b,
            eq_c: rows.iter().map(|r| r.3).collect(),
            eq_slack: rows.iter().map(|r| r.4).collect(),
            eq_ids: rows.iter().map(|r| r.0).collect(),
            limit: parts.iter().map(|p| p.limit).max().unwrap_or(DEFAULT_BINARY_LIMIT),
        };
        template.with_relaxed(body)
    }

    pub fn add(&self, other: &HybridZonotope, r: Rounding) -> Result<Self> {
        let body = self.relaxed().add(&other.relaxed(), r)?;
        Ok(Self::merged(&[self, other], body))
    }

    pub fn concat(parts: &[&HybridZonotope]) -> Self {
        let relaxed: Vec<Zonotope> = parts.iter().map(|p| p.relaxed()).collect();
        let refs: Vec<&Zonotope> = relaxed.iter().collect();
        Self::merged(parts, Zonotope::concat(&refs))
    }

    /// Exact ReLU image given enclosing pre-activation bounds.
    ///
    /// Each unstable dimension `i` with bounds `[l, u]` is replaced by
    /// `y = u/2 (1 + s2)` where
    /// `x = l/2 (1 + s1) + u/2 (1 + s2)`,
    /// `s1 + b + t1 + 1 = 0`, `s2 - b + t2 + 1 = 0` with a new binary `b`,
    /// and `x` is tied to the incoming form by an equality constraint.
    pub fn relu_exact(&self, bounds: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Result<(Self, ReluBudget)> {
        let d = self.dim();
        if bounds.len() != d {
            return Err(Error::Dimension { expected: d, found: bounds.len() });
        }
        if let Some(i) = (0..d).find(|&i| !bounds.get(i).is_finite()) {
            return Err(Error::InfiniteBound(i));
        }
        let unstable: Vec<usize> = (0..d).filter(|&i| bounds.lower[i] < 0.0 && bounds.upper[i] > 0.0).collect();
        let p = unstable.len();
        if self.binary_count() + p > self.limit {
            return Err(Error::Capacity(format!(
                "{} binary symbols exceed the enumeration limit {}",
                self.binary_count() + p,
                self.limit
            )));
        }
        let mc0 = self.symbols.len();
        let mb0 = self.binary_count();
        let k0 = self.constraint_count();
        let (mc, mb, kc) = (mc0 + 4 * p, mb0 + p, k0 + 3 * p);

        let mut out = self.clone();
        let new_cont = alloc.symbols(4 * p);
        let new_bin = alloc.symbols(p);
        out.symbols.extend_from_slice(&new_cont);
        out.binary_symbols.extend_from_slice(&new_bin);
        let grow = |m: &Array2<f64>, rows: usize, cols: usize| {
            let mut g = Array2::zeros((rows, cols));
            g.slice_mut(s![..m.nrows(), ..m.ncols()]).assign(m);
            g
        };
        out.continuous = grow(&self.continuous, d, mc);
        out.binary = grow(&self.binary, d, mb);
        out.eq_a = grow(&self.eq_a, kc, mc);
        out.eq_b = grow(&self.eq_b, kc, mb);

        for i in 0..d {
            if bounds.upper[i] <= 0.0 {
                out.continuous.row_mut(i).fill(0.0);
                out.binary.row_mut(i).fill(0.0);
                out.center[i] = 0.0;
                out.error[i] = 0.0;
            }
        }
        for (n, &i) in unstable.iter().enumerate() {
            let (l, u) = (bounds.lower[i], bounds.upper[i]);
            let (hl, hu) = (0.5 * l, 0.5 * u);
            let mut slack = self.error[i];
            if hl * 2.0 != l || hu * 2.0 != u {
                slack = r.add_hi(slack, f64::MIN_POSITIVE);
            }
            let (s1, s2, t1, t2) = (mc0 + 4 * n, mc0 + 4 * n + 1, mc0 + 4 * n + 2, mc0 + 4 * n + 3);
            let bcol = mb0 + n;
            let (k1, k2, k3) = (k0 + 3 * n, k0 + 3 * n + 1, k0 + 3 * n + 2);
            // s1 + b + t1 + 1 = 0
            out.eq_a[[k1, s1]] = 1.0;
            out.eq_a[[k1, t1]] = 1.0;
            out.eq_b[[k1, bcol]] = 1.0;
            out.eq_c.push(1.0);
            out.eq_slack.push(0.0);
            // s2 - b + t2 + 1 = 0
            out.eq_a[[k2, s2]] = 1.0;
            out.eq_a[[k2, t2]] = 1.0;
            out.eq_b[[k2, bcol]] = -1.0;
            out.eq_c.push(1.0);
            out.eq_slack.push(0.0);
            // incoming x_i - l/2 (1 + s1) - u/2 (1 + s2) = 0
            out.eq_a.slice_mut(s![k3, ..mc0]).assign(&self.continuous.row(i));
            out.eq_b.slice_mut(s![k3, ..mb0]).assign(&self.binary.row(i));
            out.eq_a[[k3, s1]] = -hl;
            out.eq_a[[k3, s2]] = -hu;
            let mut c = ErrorSum::new(r);
            c.add(self.center[i]);
            c.add(-hl);
            c.add(-hu);
            out.eq_c.push(c.value());
            out.eq_slack.push(r.add_hi(slack, c.error()));
            // y_i = u/2 + u/2 s2
            out.continuous.row_mut(i).fill(0.0);
            out.binary.row_mut(i).fill(0.0);
            out.continuous[[i, s2]] = hu;
            out.center[i] = hu;
            out.error[i] = 0.0;
        }
        for _ in 0..3 * p {
            out.eq_ids.push(alloc.constraint());
        }
        let budget = ReluBudget { continuous: 4 * p, binary: p, constraints: 3 * p };
        Ok((out, budget))
    }

    /// Constrained zonotope for one binary assignment, equalities split into
    /// two inequalities.
    pub fn branch(&self, assignment: &[f64], r: Rounding) -> ConstrainedZonotope {
        let d = self.dim();
        let mut center = Vec::with_capacity(d);
        let mut error = self.error.clone();
        for i in 0..d {
            let mut acc = ErrorSum::new(r);
            acc.add(self.center[i]);
            for (k, &e) in assignment.iter().enumerate() {
                acc.add_product(self.binary[[i, k]], e);
            }
            center.push(acc.value());
            error[i] = r.add_hi(error[i], acc.error());
        }
        let body = Zonotope { center, generators: self.continuous.clone(), symbols: self.symbols.clone(), error };
        let kc = self.constraint_count();
        let m = self.symbols.len();
        let mut a = Array2::zeros((2 * kc, m));
        let mut b = Vec::with_capacity(2 * kc);
        for k in 0..kc {
            let mut acc = ErrorSum::new(r);
            acc.add(self.eq_c[k]);
            for (j, &e) in assignment.iter().enumerate() {
                acc.add_product(self.eq_b[[k, j]], e);
            }
            let slack = r.add_hi(self.eq_slack[k], acc.error());
            a.row_mut(2 * k).assign(&self.eq_a.row(k));
            a.row_mut(2 * k + 1).assign(&(-&self.eq_a.row(k)));
            b.push(r.add_hi(acc.value(), slack));
            b.push(r.add_hi(-acc.value(), slack));
        }
        let ids = (0..2 * kc as u32).collect();
        ConstrainedZonotope { body, a, b, ids }
    }

    /// Union of the dual bounds of every feasible branch.
    pub fn concretize_enum(&self, cfg: &DualConfig, r: Rounding) -> Result<DualBounds> {
        let mb = self.binary_count();
        if mb > self.limit {
            return Err(Error::Capacity(format!("{mb} binary symbols exceed the enumeration limit {}", self.limit)));
        }
        let cfg = DualConfig { method: DualMethod::Simplex, ..*cfg };
        let branches: Vec<Option<IntervalTensor>> = (0..1u64 << mb)
            .into_par_iter()
            .map(|code| {
                let assignment: Vec<f64> = (0..mb).map(|j| if code >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let cz = self.branch(&assignment, r);
                let db = cz.concretize_dual(&cfg, r);
                (!db.empty).then_some(db.bounds)
            })
            .collect();
        let mut acc: Option<IntervalTensor> = None;
        for b in branches.into_iter().flatten() {
            acc = Some(match acc {
                None => b,
                Some(a) => a.hull(&b),
            });
        }
        let d = self.dim();
        Ok(match acc {
            Some(bounds) => DualBounds { bounds, empty: false },
            None => {
                let empty = IntervalTensor { shape: vec![d], lower: vec![f64::INFINITY; d], upper: vec![f64::NEG_INFINITY; d] };
                DualBounds { bounds: empty, empty: true }
            }
        })
    }
}
