//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use nnreach::network::{NetworkGraph, Op};
use nnreach::property::{Goal, LinearAtom, NormalizedProperty, Predicate};
use nnreach::IntervalTensor;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_box(rng: &mut ChaCha8Rng, n: usize) -> IntervalTensor {
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for _ in 0..n {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let r: f64 = rng.gen_range(0.05..1.0);
        lo.push(c - r);
        hi.push(c + r);
    }
    IntervalTensor::from_bounds(lo, hi).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Fully connected layers `(W, b)`, ReLU between consecutive layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<(Array2<f64>, Vec<f64>)>,
}

impl Mlp {
    pub fn random(rng: &mut ChaCha8Rng, sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| (random_matrix(rng, w[1], w[0]), random_vec(rng, w[1], 0.5)))
            .collect();
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].0.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.layers[..self.layers.len() - 1].iter().map(|(w, _)| w.nrows()).sum()
    }

    pub fn graph(&self) -> NetworkGraph {
        let mut ops = Vec::new();
        for (k, (w, b)) in self.layers.iter().enumerate() {
            ops.push(Op::Affine { weight: w.clone(), bias: b.clone() });
            if k + 1 < self.layers.len() {
                ops.push(Op::Relu);
            }
        }
        NetworkGraph::sequential(vec![self.inputs()], ops).unwrap()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for (k, (w, b)) in self.layers.iter().enumerate() {
            v = affine(w, b, &v);
            if k + 1 < self.layers.len() {
                v.iter_mut().for_each(|t| *t = t.max(0.0));
            }
        }
        v
    }
}

pub fn affine(w: &Array2<f64>, b: &[f64], x: &[f64]) -> Vec<f64> {
    (0..w.nrows()).map(|i| b[i] + (0..w.ncols()).map(|j| w[[i, j]] * x[j]).sum::<f64>()).collect()
}

/// Random feed-forward net mixing ReLU and sigmoid layers.
pub fn random_mixed_net(rng: &mut ChaCha8Rng, inputs: usize, hidden: &[usize], outputs: usize) -> NetworkGraph {
    let mut ops = Vec::new();
    let mut prev = inputs;
    for &h in hidden {
        let scale = 2.0 / (prev as f64).sqrt();
        let w = random_matrix(rng, h, prev).mapv(|v| v * scale);
        ops.push(Op::Affine { weight: w, bias: random_vec(rng, h, 0.5) });
        ops.push(if rng.gen_bool(0.5) { Op::Relu } else { Op::Sigmoid });
        prev = h;
    }
    ops.push(Op::Affine { weight: random_matrix(rng, outputs, prev), bias: random_vec(rng, outputs, 0.5) });
    NetworkGraph::sequential(vec![inputs], ops).unwrap()
}

pub fn sample(rng: &mut ChaCha8Rng, b: &IntervalTensor) -> Vec<f64> {
    b.lower.iter().zip(&b.upper).map(|(&l, &u)| if u > l { rng.gen_range(l..=u) } else { l }).collect()
}

pub fn corners(b: &IntervalTensor) -> Vec<Vec<f64>> {
    let n = b.len();
    (0..1usize << n)
        .map(|k| (0..n).map(|i| if k >> i & 1 == 1 { b.upper[i] } else { b.lower[i] }).collect())
        .collect()
}

/// Regular grid with `per_dim` points per axis, endpoints included.
pub fn grid(b: &IntervalTensor, per_dim: usize) -> Vec<Vec<f64>> {
    let n = b.len();
    let total = per_dim.pow(n as u32);
    let step = |i: usize, k: usize| {
        if per_dim == 1 {
            0.5 * (b.lower[i] + b.upper[i])
        } else {
            b.lower[i] + (b.upper[i] - b.lower[i]) * k as f64 / (per_dim - 1) as f64
        }
    };
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|i| {
                    let k = code % per_dim;
                    code /= per_dim;
                    step(i, k)
                })
                .collect()
        })
        .collect()
}

/// `prove sum c_j y_j <= rhs` on `b`.
pub fn output_le(b: IntervalTensor, outputs: Vec<(usize, f64)>, rhs: f64) -> NormalizedProperty {
    NormalizedProperty { input_box: b, predicate: Predicate::Atom(LinearAtom::output_le(outputs, rhs)), goal: Goal::Prove }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        rhs.swap(col, p);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    Some(x)
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Half-space `a . x + b >= 0`.
#[derive(Debug, Clone)]
pub struct Half {
    pub a: Vec<f64>,
    pub b: f64,
}

pub fn box_halves(b: &IntervalTensor) -> Vec<Half> {
    let n = b.len();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(Half { a: e.clone(), b: -b.lower[i] });
        e[i] = -1.0;
        out.push(Half { a: e, b: b.upper[i] });
    }
    out
}

/// Vertices of `{x in R^n : every half holds}` by trying every choice of
/// `n` active constraints.
pub fn vertices(n: usize, halves: &[Half], tol: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    subsets(halves.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| halves[i].a.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| -halves[i].b).collect();
        if let Some(x) = solve(a, rhs) {
            let ok = halves.iter().all(|h| {
                let v: f64 = h.a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() + h.b;
                let scale = 1.0 + h.b.abs() + h.a.iter().map(|c| c.abs()).sum::<f64>();
                v >= -tol * scale
            });
            if ok {
                out.push(x);
            }
        }
    });
    out
}

/// Every vertex of every linear region of a ReLU MLP restricted to `b`.
/// Each sign pattern of the hidden neurons fixes an affine map; its region
/// is a polytope whose vertices are enumerated directly.
pub fn region_vertices(net: &Mlp, b: &IntervalTensor) -> Vec<Vec<f64>> {
    let n = net.inputs();
    let hidden = net.hidden();
    let mut out = Vec::new();
    for pattern in 0..1u64 << hidden {
        let mut halves = box_halves(b);
        // Current layer values as affine forms in x: rows of (coeffs, offset).
        let mut forms: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                (e, 0.0)
            })
            .collect();
        let mut bit = 0;
        for (w, bias) in &net.layers[..net.layers.len() - 1] {
            let mut next = Vec::with_capacity(w.nrows());
            for r in 0..w.nrows() {
                let mut c = vec![0.0; n];
                let mut o = bias[r];
                for (j, (fc, fo)) in forms.iter().enumerate() {
                    for k in 0..n {
                        c[k] += w[[r, j]] * fc[k];
                    }
                    o += w[[r, j]] * fo;
                }
                if pattern >> bit & 1 == 1 {
                    halves.push(Half { a: c.clone(), b: o });
                    next.push((c, o));
                } else {
                    halves.push(Half { a: c.iter().map(|v| -v).collect(), b: -o });
                    next.push((vec![0.0; n], 0.0));
                }
                bit += 1;
            }
            forms = next;
        }
        out.extend(vertices(n, &halves, 1e-9));
    }
    out
}

/// Exact per-output range of a ReLU MLP over `b`, extremes being attained
/// at region vertices.
pub fn exact_range(net: &Mlp, b: &IntervalTensor) -> (Vec<f64>, Vec<f64>) {
    let outs = net.layers.last().unwrap().0.nrows();
    let mut lo = vec![f64::INFINITY; outs];
    let mut hi = vec![f64::NEG_INFINITY; outs];
    for x in region_vertices(net, b) {
        let x: Vec<f64> = x.iter().enumerate().map(|(i, v)| v.clamp(b.lower[i], b.upper[i])).collect();
        for (k, y) in net.eval(&x).into_iter().enumerate() {
            lo[k] = lo[k].min(y);
            hi[k] = hi[k].max(y);
        }
    }
    (lo, hi)
}

/// Minimum of `alpha . eps + beta` over `eps in [-1, 1]^m`, `A eps + b >= 0`,
/// by vertex enumeration. `None` when infeasible.
pub fn lp_min_by_vertices(alpha: &[f64], beta: f64, a: &Array2<f64>, b: &[f64]) -> Option<f64> {
    let m = alpha.len();
    let mut halves = box_halves(&IntervalTensor::from_bounds(vec![-1.0; m], vec![1.0; m]).unwrap());
    for k in 0..a.nrows() {
        halves.push(Half { a: a.row(k).to_vec(), b: b[k] });
    }
    vertices(m, &halves, 1e-10)
        .iter()
        .map(|e| alpha.iter().zip(e).map(|(p, q)| p * q).sum::<f64>() + beta)
        .min_by(f64::total_cmp)
}

/// Plain interval propagation of a ReLU MLP, rounded outward by one ulp per
/// layer. Independent of the library's box domain.
pub fn naive_interval(net: &Mlp, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut l, mut u) = (lo.to_vec(), hi.to_vec());
    for (k, (w, b)) in net.layers.iter().enumerate() {
        let mut nl = b.clone();
        let mut nu = b.clone();
        for r in 0..w.nrows() {
            for j in 0..w.ncols() {
                let c = w[[r, j]];
                if c >= 0.0 {
                    nl[r] += c * l[j];
                    nu[r] += c * u[j];
                } else {
                    nl[r] += c * u[j];
                    nu[r] += c * l[j];
                }
            }
            let slack = 1e-12 * (1.0 + nl[r].abs().max(nu[r].abs()));
            nl[r] -= slack;
            nu[r] += slack;
        }
        if k + 1 < net.layers.len() {
            nl.iter_mut().for_each(|v| *v = v.max(0.0));
            nu.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        l = nl;
        u = nu;
    }
    (l, u)
}

/// Box-subdivision oracle for `y[out] <= rhs`: `Some(true)` when interval
/// bounds on every cell prove it, `Some(false)` when a cell sample violates
/// it, `None` when the grid is too coarse to tell.
pub fn subdivision_oracle(net: &Mlp, b: &IntervalTensor, out: usize, rhs: f64, cells: usize) -> Option<bool> {
    let n = b.len();
    let mut proved = true;
    for code in 0..cells.pow(n as u32) {
        let mut c = code;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            let k = c % cells;
            c /= cells;
            let w = (b.upper[i] - b.lower[i]) / cells as f64;
            lo[i] = b.lower[i] + w * k as f64;
            hi[i] = if k + 1 == cells { b.upper[i] } else { b.lower[i] + w * (k + 1) as f64 };
        }
        let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        for x in [&lo, &hi, &mid] {
            if net.eval(x)[out] > rhs {
                return Some(false);
            }
        }
        if naive_interval(net, &lo, &hi).1[out] > rhs {
            proved = false;
        }
    }
    proved.then_some(true)
}

fn widen(v: f64, mag: f64, ulps: f64) -> (f64, f64) {
    let e = ulps * f64::EPSILON * mag + f64::MIN_POSITIVE;
    (v - e, v + e)
}

/// Rigorous enclosure of the real-arithmetic output of a sequential
/// Affine/ReLU/Sigmoid graph at the point `x`, from plain `f64` evaluation
/// plus a priori error bounds.
pub fn point_enclosure(g: &NetworkGraph, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (mut lo, mut hi) = (x.to_vec(), x.to_vec());
    for node in &g.nodes {
        match &node.op {
            Op::Affine { weight, bias } => {
                let n = weight.ncols();
                let mut nl = Vec::with_capacity(weight.nrows());
                let mut nu = Vec::with_capacity(weight.nrows());
                for r in 0..weight.nrows() {
                    let (mut s_lo, mut s_hi, mut mag) = (bias[r], bias[r], bias[r].abs());
                    for j in 0..n {
                        let c = weight[[r, j]];
                        let (a, b) = if c >= 0.0 { (c * lo[j], c * hi[j]) } else { (c * hi[j], c * lo[j]) };
                        s_lo += a;
                        s_hi += b;
                        mag += a.abs().max(b.abs());
                    }
                    let k = (2 * n + 4) as f64;
                    nl.push(widen(s_lo, mag, k).0);
                    nu.push(widen(s_hi, mag, k).1);
                }
                lo = nl;
                hi = nu;
            }
            Op::Relu => {
                lo.iter_mut().for_each(|v| *v = v.max(0.0));
                hi.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            Op::Sigmoid => {
                let s = |v: f64| 1.0 / (1.0 + (-v).exp());
                lo.iter_mut().for_each(|v| *v = widen(s(*v), 1.0, 8.0).0.max(0.0));
                hi.iter_mut().for_each(|v| *v = widen(s(*v), 1.0, 8.0).1.min(1.0));
            }
            op => panic!("unsupported op {}", op.kind()),
        }
    }
    (lo, hi)
}
