//! Acceptance run: one PASS/FAIL line per criterion, then a single assertion.
//!
//! `cargo test -p nnreach --test acceptance -- --nocapture` shows the lines.
//! Set `NNREACH_ACAS_DIR` to a directory holding `ACASXU_run2a_1_1_batch_2000.onnx`
//! and `prop_1.vnnlib` to run criterion 9 on the public network.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::{array, Array2};
use nnreach::analysis::{forward, AttackConfig};
use nnreach::constrained::{ConstrainedZonotope, DualConfig, DualMethod};
use nnreach::hybrid::HybridZonotope;
use nnreach::interval::Interval;
use nnreach::network::{nnet, onnx, rewrite, GraphBuilder, NetworkGraph, Op};
use nnreach::property::{vnnlib, Goal, LinearAtom, NormalizedProperty, Predicate};
use nnreach::{
    bab_input, bab_relu, verify, Allocator, AnalysisConfig, BabConfig, DomainKind, IntervalTensor, Problem, Region,
    Rounding, SplitMode, Status, Zonotope,
};
use rand::Rng;

use common::Mlp;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn all_domains(rounding: Rounding) -> AnalysisConfig {
    let mut cfg = AnalysisConfig::with_domains(&[DomainKind::Zonotope, DomainKind::Constrained, DomainKind::Hybrid]);
    cfg.rounding = rounding;
    cfg.binary_limit = 8;
    cfg
}

fn excursion(b: &IntervalTensor, y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &v)| (b.lower[i] - v).max(v - b.upper[i]).max(0.0) / v.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = common::rng(1);
    let nets = 50;
    let mut sound_outside = 0usize;
    let mut ulp_crossings = 0usize;
    let mut fast_worst = 0.0f64;
    let mut enclosures = 0usize;
    for _ in 0..nets {
        let inputs = rng.gen_range(1..=6);
        let depth = rng.gen_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(2..=16)).collect();
        let outputs = rng.gen_range(1..=4);
        let g = common::random_mixed_net(&mut rng, inputs, &hidden, outputs);
        let b = common::random_box(&mut rng, inputs);
        let mut xs = common::corners(&b);
        while xs.len() < 10_000 {
            xs.push(common::sample(&mut rng, &b));
        }
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| g.infer(x).unwrap()).collect();
        let exact: Vec<(Vec<f64>, Vec<f64>)> = xs.iter().map(|x| common::point_enclosure(&g, x)).collect();
        for rounding in [Rounding::Sound, Rounding::Fast] {
            let cfg = all_domains(rounding);
            let fwd = forward(&g, &Region::new(b.clone()), &cfg, None, None).unwrap().expect("non-empty input box");
            let mut sets = vec![fwd.bounds.clone(), fwd.boxed.clone()];
            if let Some(z) = &fwd.zonotope {
                sets.push(z.concretize(rounding));
            }
            if let Some(c) = &fwd.constrained {
                let d = c.concretize_dual(&cfg.dual, rounding);
                if d.empty {
                    sound_outside += 1;
                }
                sets.push(d.bounds);
            }
            if let Some(h) = &fwd.hybrid {
                sets.push(h.concretize_relaxed(rounding));
                if let Ok(d) = h.concretize_enum(&cfg.dual, rounding) {
                    sets.push(d.bounds);
                }
            }
            enclosures += sets.len();
            for s in &sets {
                for (y, (ylo, yhi)) in ys.iter().zip(&exact) {
                    match rounding {
                        Rounding::Sound => {
                            sound_outside += usize::from((0..y.len()).any(|i| yhi[i] < s.lower[i] || ylo[i] > s.upper[i]));
                            ulp_crossings += usize::from(!s.contains_point(y));
                        }
                        Rounding::Fast => fast_worst = fast_worst.max(excursion(s, y)),
                    }
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        sound_outside == 0 && fast_worst <= 1e-6 && secs < 300.0,
        format!(
            "{nets} nets x 10^4 samples, {enclosures} enclosures: {sound_outside} sound escapes ({ulp_crossings} float samples within rounding of a bound), worst fast excursion {fast_worst:.1e}, {secs:.1}s"
        ),
    )
}

fn random_interval(rng: &mut rand_chacha::ChaCha8Rng) -> Interval {
    let kind = rng.gen_range(0..4);
    let (a, b): (f64, f64) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
    match kind {
        0 => Interval::new(a.abs().min(b.abs()) + 0.1, a.abs().max(b.abs()) + 0.1),
        1 => Interval::new(-(a.abs().max(b.abs())) - 0.1, -(a.abs().min(b.abs())) - 0.1),
        2 => Interval::new(-a.abs(), b.abs()),
        _ => Interval::point(a),
    }
}

fn axis(i: Interval, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { i.hi } else { i.lo + (i.hi - i.lo) * k as f64 / (n - 1) as f64 }).collect()
}

/// Checks `got` against the brute-force hull `[lo, hi]`: equal in fast mode,
/// enclosing and at most two ulps wider in sound mode.
fn table_row_ok(got: Interval, lo: f64, hi: f64, r: Rounding) -> bool {
    match r {
        Rounding::Fast => got.lo == lo && got.hi == hi,
        Rounding::Sound => got.lo <= lo && got.hi >= hi && got.lo >= lo.next_down().next_down() && got.hi <= hi.next_up().next_up(),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = common::rng(2);
    let mut failures = Vec::new();
    let mut checked = 0usize;
    let pairs = 200;
    type Binary = fn(Interval, Interval, Rounding) -> Interval;
    type Scalar = fn(f64, f64) -> f64;
    let binary: [(&str, Binary, Scalar); 4] = [
        ("add", |a, b, r| a.add(b, r), |x, y| x + y),
        ("sub", |a, b, r| a.sub(b, r), |x, y| x - y),
        ("mul", |a, b, r| a.mul(b, r), |x, y| x * y),
        ("div", |a, b, r| a.div(b, r), |x, y| x / y),
    ];
    for r in [Rounding::Fast, Rounding::Sound] {
        for (name, op, f) in binary {
            for _ in 0..pairs {
                let (a, b) = (random_interval(&mut rng), random_interval(&mut rng));
                let got = op(a, b, r);
                checked += 1;
                if name == "div" && b.lo <= 0.0 && 0.0 <= b.hi {
                    if !got.is_top() {
                        failures.push(format!("{name} {a:?} {b:?} expected top"));
                    }
                    continue;
                }
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for x in axis(a, 100) {
                    for y in axis(b, 100) {
                        let v = f(x, y);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                if !table_row_ok(got, lo, hi, r) {
                    failures.push(format!("{name} {r:?} {a:?} {b:?}: {got:?} vs [{lo}, {hi}]"));
                }
            }
        }
        for _ in 0..pairs {
            let a = random_interval(&mut rng);
            let k: f64 = rng.gen_range(-5.0..5.0);
            let grid = axis(a, 10_000);
            let hull = |f: &dyn Fn(f64) -> f64| {
                grid.iter().map(|&x| f(x)).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)))
            };
            checked += 3;
            let (lo, hi) = hull(&|x| -x);
            if !table_row_ok(a.neg(), lo, hi, Rounding::Fast) {
                failures.push(format!("neg {a:?}"));
            }
            let (lo, hi) = hull(&|x| k * x);
            if !table_row_ok(a.scale(k, r), lo, hi, r) {
                failures.push(format!("scale {r:?} {k} {a:?}"));
            }
            let inv = a.inv(r);
            if a.lo <= 0.0 && 0.0 <= a.hi {
                if !inv.is_top() {
                    failures.push(format!("inv {a:?} expected top"));
                }
            } else {
                let (lo, hi) = hull(&|x| 1.0 / x);
                if !table_row_ok(inv, lo, hi, r) {
                    failures.push(format!("inv {r:?} {a:?}: {inv:?} vs [{lo}, {hi}]"));
                }
            }
        }
    }
    outcome(failures.is_empty(), format!("{checked} operand cases over 10^4-point grids, {} mismatches{}", failures.len(), first(&failures)))
}

/// The first recorded failure, for the report line.
fn first(failures: &[String]) -> String {
    failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
}

fn criterion_3() -> Outcome {
    let mut rng = common::rng(3);
    let nets = 100;
    let mut worst = 0.0f64;
    let mut escapes = 0usize;
    let mut box_narrower = 0usize;
    for _ in 0..nets {
        let inputs = rng.gen_range(1..=10);
        let depth = rng.gen_range(1..=3);
        let mut ops = Vec::new();
        let mut prev = inputs;
        for _ in 0..depth {
            let next = rng.gen_range(1..=8);
            ops.push(Op::Affine { weight: common::random_matrix(&mut rng, next, prev), bias: common::random_vec(&mut rng, next, 1.0) });
            prev = next;
        }
        let g = NetworkGraph::sequential(vec![inputs], ops).unwrap();
        let b = common::random_box(&mut rng, inputs);
        let cfg = AnalysisConfig::with_domains(&[DomainKind::Zonotope]);
        let fwd = forward(&g, &Region::new(b.clone()), &cfg, None, None).unwrap().unwrap();
        let z = fwd.zonotope.as_ref().unwrap().concretize(Rounding::Sound);
        let (mut lo, mut hi) = (vec![f64::INFINITY; prev], vec![f64::NEG_INFINITY; prev]);
        for x in common::corners(&b) {
            for (k, y) in g.infer(&x).unwrap().into_iter().enumerate() {
                lo[k] = lo[k].min(y);
                hi[k] = hi[k].max(y);
            }
        }
        for k in 0..prev {
            let scale = 1.0 + lo[k].abs().max(hi[k].abs());
            let tol = 1e-12 * scale;
            worst = worst.max((lo[k] - z.lower[k]).abs().max((z.upper[k] - hi[k]).abs()) / scale);
            if z.lower[k] > lo[k] + tol || z.upper[k] < hi[k] - tol {
                escapes += 1;
            }
            if fwd.boxed.lower[k] > z.lower[k] + tol || fwd.boxed.upper[k] < z.upper[k] - tol {
                box_narrower += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10 && escapes == 0 && box_narrower == 0,
        format!("{nets} affine nets: worst relative gap to corner range {worst:.1e}, {escapes} escapes, box narrower in {box_narrower} outputs"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = common::rng(4);
    let cases = 500;
    let mut invalid = 0usize;
    let mut close = 0usize;
    let mut worst = 0.0f64;
    let cfg = DualConfig { method: DualMethod::Gradient, iterations: 200, step: 0.1 };
    for _ in 0..cases {
        let m = rng.gen_range(1..=8);
        let k = rng.gen_range(1..=4);
        let mut alloc = Allocator::new();
        let b0 = IntervalTensor::from_bounds(vec![-1.0; m], vec![1.0; m]).unwrap();
        let eps = Zonotope::from_box(&b0, &mut alloc, Rounding::Sound).unwrap();
        let alpha = common::random_vec(&mut rng, m, 1.0);
        let beta: f64 = rng.gen_range(-1.0..1.0);
        let w = Array2::from_shape_vec((1, m), alpha.clone()).unwrap();
        let body = eps.affine(&w, Some(&[beta]), Rounding::Sound).unwrap();
        let a = common::random_matrix(&mut rng, k, m);
        let star = common::random_vec(&mut rng, m, 1.0);
        let b: Vec<f64> = (0..k)
            .map(|r| -(0..m).map(|j| a[[r, j]] * star[j]).sum::<f64>() + rng.gen_range(0.0..0.5))
            .collect();
        let cz = ConstrainedZonotope { body, a: a.clone(), b: b.clone(), ids: (0..k as u32).collect() };
        let d = cz.concretize_dual(&cfg, Rounding::Sound);
        let dual = d.bounds.lower[0];
        let per_dim = ((2e5f64).powf(1.0 / m as f64).floor() as usize).max(3);
        let grid_min = common::grid(&b0, per_dim)
            .iter()
            .filter(|e| (0..k).all(|r| (0..m).map(|j| a[[r, j]] * e[j]).sum::<f64>() + b[r] >= 0.0))
            .map(|e| alpha.iter().zip(e.iter()).map(|(p, q)| p * q).sum::<f64>() + beta)
            .fold(f64::INFINITY, f64::min);
        let exact = common::lp_min_by_vertices(&alpha, beta, &a, &b).expect("feasible by construction");
        if d.empty || dual > grid_min || dual > exact + 1e-9 * (1.0 + exact.abs()) {
            invalid += 1;
        }
        let gap = (exact - dual).max(0.0) / exact.abs().max(1.0);
        worst = worst.max(gap);
        if gap <= 0.05 {
            close += 1;
        }
    }
    let share = close as f64 / cases as f64;
    outcome(
        invalid == 0 && share >= 0.9,
        format!("{cases} constrained zonotopes: {invalid} bounds above the oracle minimum, {:.1}% within 5% after 200 iterations (worst gap {worst:.3})", share * 100.0),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = common::rng(5);
    let nets = 100;
    let mut worst = 0.0f64;
    let mut budget_errors = 0usize;
    let mut failures = 0usize;
    for _ in 0..nets {
        let n = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=6);
        let outs = rng.gen_range(1..=2);
        let net = Mlp::random(&mut rng, &[n, d, outs]);
        let b = common::random_box(&mut rng, n);
        let (mut lo, mut hi) = common::exact_range(&net, &b);
        let per_dim = (10_000f64.powf(1.0 / n as f64).floor() as usize).max(2);
        for x in common::grid(&b, per_dim) {
            for (k, y) in net.eval(&x).into_iter().enumerate() {
                lo[k] = lo[k].min(y);
                hi[k] = hi[k].max(y);
            }
        }

        let cfg = AnalysisConfig::with_domains(&[DomainKind::Hybrid]);
        let fwd = forward(&net.graph(), &Region::new(b.clone()), &cfg, None, None).unwrap().unwrap();
        let Some(hz) = fwd.hybrid.as_ref() else {
            failures += 1;
            continue;
        };
        let e = hz.concretize_enum(&DualConfig::default(), Rounding::Sound).unwrap().bounds;
        for k in 0..outs {
            let scale = 1.0 + lo[k].abs().max(hi[k].abs());
            let gap = (e.lower[k] - lo[k]).abs().max((e.upper[k] - hi[k]).abs());
            worst = worst.max(gap);
            if gap > 1e-4 + 1e-9 * scale || e.lower[k] > lo[k] + 1e-9 * scale || e.upper[k] < hi[k] - 1e-9 * scale {
                failures += 1;
            }
        }

        let mut alloc = Allocator::new();
        let x = Zonotope::from_box(&b, &mut alloc, Rounding::Sound).unwrap();
        let (w, c) = &net.layers[0];
        let pre = x.affine(w, Some(c), Rounding::Sound).unwrap();
        let bounds = pre.concretize(Rounding::Sound);
        let p = (0..d).filter(|&i| bounds.lower[i] < 0.0 && bounds.upper[i] > 0.0).count();
        let h0 = HybridZonotope::from_zonotope(&pre, 16);
        let (h1, budget) = h0.relu_exact(&bounds, &mut alloc, Rounding::Sound).unwrap();
        let grown = (
            h1.symbols.len() - h0.symbols.len(),
            h1.binary_count() - h0.binary_count(),
            h1.constraint_count() - h0.constraint_count(),
        );
        let stated = (budget.continuous, budget.binary, budget.constraints);
        if stated != (4 * p, p, 3 * p) || grown != stated || p > d {
            budget_errors += 1;
        }
    }
    outcome(
        failures == 0 && budget_errors == 0,
        format!("{nets} one-hidden-layer nets: worst enumeration gap {worst:.1e}, {failures} mismatches, {budget_errors} budget violations"),
    )
}

fn relu_instance(rng: &mut rand_chacha::ChaCha8Rng) -> (Mlp, IntervalTensor) {
    let n = rng.gen_range(1..=3);
    let cap = if n == 3 { 6 } else { 10 };
    let sizes = if rng.gen_bool(0.5) {
        vec![n, rng.gen_range(2..=cap), 1]
    } else {
        let h1 = rng.gen_range(1..=cap / 2);
        vec![n, h1, rng.gen_range(1..=cap - h1), 1]
    };
    (Mlp::random(rng, &sizes), common::random_box(rng, n))
}

fn threshold(rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64) -> (f64, bool) {
    let delta = (hi - lo).max(1e-3) * rng.gen_range(0.02..0.3);
    if rng.gen_bool(0.5) {
        (hi + delta, true)
    } else {
        (hi - delta, false)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = common::rng(6);
    let instances = 200;
    let mut relu_disagree = Vec::new();
    let mut unstable_max = 0usize;
    for case in 0..instances {
        let (net, b) = relu_instance(&mut rng);
        let (lo, hi) = common::exact_range(&net, &b);
        let (t, holds) = threshold(&mut rng, lo[0], hi[0]);
        let mut cfg = AnalysisConfig::with_domains(&[DomainKind::Constrained]);
        cfg.dual.method = DualMethod::Simplex;
        cfg.seed = case;
        let problem = Problem::new(net.graph(), common::output_le(b.clone(), vec![(0, 1.0)], t), &cfg).unwrap();
        let out = bab_relu(&problem, &b, &cfg, &BabConfig::default(), None).unwrap();
        unstable_max = unstable_max.max(out.verdict.stats.unstable_relus);
        let want = if holds { Status::True } else { Status::False };
        if out.verdict.status != want {
            relu_disagree.push(format!("#{case}: {:?} vs {want:?}", out.verdict.status));
        }
    }

    let mut input_disagree = Vec::new();
    let mut decided = 0u64;
    let input_cases = 100u64;
    for case in 0..input_cases {
        let n = rng.gen_range(1..=2);
        let sizes = [n, rng.gen_range(2..=8), rng.gen_range(2..=6), 1];
        let net = Mlp::random(&mut rng, &sizes);
        let b = common::random_box(&mut rng, n);
        let (lo, hi) = common::exact_range(&net, &b);
        let (t, _) = threshold(&mut rng, lo[0], hi[0]);
        let cells = if n == 1 { 2000 } else { 64 };
        let Some(truth) = common::subdivision_oracle(&net, &b, 0, t, cells) else {
            continue;
        };
        decided += 1;
        let mut cfg = AnalysisConfig::with_domains(&[DomainKind::Zonotope]);
        cfg.seed = case;
        let problem = Problem::new(net.graph(), common::output_le(b.clone(), vec![(0, 1.0)], t), &cfg).unwrap();
        let out = bab_input(&problem, &b, &cfg, &BabConfig::default(), None).unwrap();
        let want = if truth { Status::True } else { Status::False };
        if out.verdict.status != want {
            input_disagree.push(format!("#{case}: {:?} vs {want:?}", out.verdict.status));
        }
    }
    outcome(
        relu_disagree.is_empty() && input_disagree.is_empty() && decided * 10 >= input_cases * 9,
        format!(
            "ReLU splitting: {instances} instances (<= {unstable_max} unstable), {} disagreements{}; input splitting: {decided}/{input_cases} decided by the grid oracle, {} disagreements{}",
            relu_disagree.len(),
            first(&relu_disagree),
            input_disagree.len(),
            first(&input_disagree)
        ),
    )
}

fn max_diff(a: &NetworkGraph, b: &NetworkGraph, rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let n = a.input_len();
    let bx = IntervalTensor::from_bounds(vec![lo; n], vec![hi; n]).unwrap();
    (0..1000)
        .map(|_| {
            let x = common::sample(rng, &bx);
            let (ya, yb) = (a.infer(&x).unwrap(), b.infer(&x).unwrap());
            ya.iter().zip(&yb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let mut rng = common::rng(7);
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    let pools: [([usize; 3], [usize; 2], [usize; 2]); 5] = [
        ([1, 4, 4], [2, 2], [2, 2]),
        ([2, 5, 5], [3, 3], [1, 1]),
        ([1, 6, 4], [2, 3], [2, 1]),
        ([3, 3, 3], [3, 3], [3, 3]),
        ([1, 4, 4], [1, 1], [1, 1]),
    ];
    for (shape, kernel, stride) in pools {
        let mut b = GraphBuilder::new("x", shape.to_vec());
        b.then("pool", Op::MaxPool { kernel, stride }).unwrap();
        b.then("flat", Op::Flatten).unwrap();
        let n: usize = b.shape_of(b.last()).iter().product();
        let y = b.then("fc", Op::Affine { weight: common::random_matrix(&mut rng, 3, n), bias: vec![0.1, -0.2, 0.3] }).unwrap();
        let g = b.finish(y).unwrap();
        let r = rewrite::rewrite_maxpool(&g).unwrap();
        if r.nodes.iter().any(|n| matches!(n.op, Op::MaxPool { .. })) {
            problems.push(format!("max pool left in {shape:?}"));
        }
        worst = worst.max(max_diff(&g, &r, &mut rng, -5.0, 5.0));
    }

    let mut b = GraphBuilder::new("x", vec![2, 3]);
    b.then("t0", Op::Transpose { perm: vec![1, 0] }).unwrap();
    b.then("t1", Op::Transpose { perm: vec![1, 0] }).unwrap();
    b.then("flat", Op::Flatten).unwrap();
    b.then("mm", Op::MatMul { weight: common::random_matrix(&mut rng, 4, 6) }).unwrap();
    b.then("bias", Op::BiasAdd { bias: vec![0.5, -0.5, 1.0, 0.0], shape: vec![4] }).unwrap();
    b.then("relu", Op::Relu).unwrap();
    b.then("fc", Op::Affine { weight: common::random_matrix(&mut rng, 2, 4), bias: vec![0.0, 1.0] }).unwrap();
    let y = b.then("bias2", Op::BiasAdd { bias: vec![0.25], shape: vec![1] }).unwrap();
    let g = b.finish(y).unwrap();
    let s = rewrite::simplify(&g, false).unwrap();
    if s.nodes.len() != 3 {
        problems.push(format!("fusion left {} nodes", s.nodes.len()));
    }
    worst = worst.max(max_diff(&g, &s, &mut rng, -3.0, 3.0));

    let relu = |v: f64| v.max(0.0);
    let mut identity_gap = 0.0f64;
    for _ in 0..10_000 {
        let (a, c): (f64, f64) = (rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let three = relu(a - c) + relu(c) - relu(-c);
        let two = relu(a - c) + c;
        let scale = 1.0 + a.abs() + c.abs();
        identity_gap = identity_gap.max((three - two).abs() / scale).max((two - a.max(c)).abs() / scale);
    }
    outcome(
        worst <= 1e-6 && identity_gap <= 1e-14 && problems.is_empty(),
        format!("rewrites over 6 fixtures x 10^3 inputs: worst deviation {worst:.1e}; max identities agree to {identity_gap:.1e}{}", first(&problems)),
    )
}

fn criterion_8() -> Outcome {
    let g = NetworkGraph::sequential(vec![2], vec![Op::Affine { weight: array![[3.0, 2.0], [1.0, 2.0]], bias: vec![-2.0, 0.0] }]).unwrap();
    let b = IntervalTensor::from_bounds(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let prop = NormalizedProperty {
        input_box: b.clone(),
        predicate: Predicate::Atom(LinearAtom { outputs: vec![(0, 1.0), (1, -1.0)], inputs: vec![], rhs: 0.0, strict: false }),
        goal: Goal::Prove,
    };
    let run = |layer: bool| {
        let mut cfg = AnalysisConfig::with_domains(&[DomainKind::Zonotope]);
        cfg.property_layer = layer;
        cfg.attack.enabled = false;
        let p = Problem::new(g.clone(), prop.clone(), &cfg).unwrap();
        let out = verify(&p, SplitMode::None, &cfg, &BabConfig::default(), None).unwrap();
        let fwd = forward(&p.graph, &Region::new(b.clone()), &cfg, None, None).unwrap().unwrap();
        (out.verdict, fwd.bounds)
    };
    let (plain, ys) = run(false);
    let (layered, zs) = run(true);
    let y_ok = ys.lower == vec![-7.0, -3.0] && ys.upper == vec![3.0, 3.0];
    let z_ok = zs.lower == vec![-4.0] && zs.upper == vec![0.0];
    let pass = y_ok && z_ok && plain.status == Status::Unknown && layered.status == Status::True;
    outcome(
        pass,
        format!(
            "y0 in [{}, {}], y1 in [{}, {}] -> {:?}; z0 in [{}, {}] -> {:?}",
            ys.lower[0], ys.upper[0], ys.lower[1], ys.upper[1], plain.status, zs.lower[0], zs.upper[0], layered.status
        ),
    )
}

fn surrogate_oracle(net: &Mlp, b: &IntervalTensor, out: usize, rhs: f64) -> bool {
    let cells = [2usize, 12, 12, 2, 2];
    let total: usize = cells.iter().product();
    (0..total).all(|mut code| {
        let mut lo = vec![0.0; 5];
        let mut hi = vec![0.0; 5];
        for i in 0..5 {
            let k = code % cells[i];
            code /= cells[i];
            let w = (b.upper[i] - b.lower[i]) / cells[i] as f64;
            lo[i] = b.lower[i] + w * k as f64;
            hi[i] = if k + 1 == cells[i] { b.upper[i] } else { b.lower[i] + w * (k + 1) as f64 };
        }
        common::naive_interval(net, &lo, &hi).1[out] < rhs
    })
}

fn criterion_9() -> Outcome {
    let budget = Duration::from_secs(600);
    let mut cfg = AnalysisConfig::with_domains(&[DomainKind::Zonotope]);
    cfg.attack = AttackConfig::default();
    let acas = std::env::var_os("NNREACH_ACAS_DIR").map(std::path::PathBuf::from).and_then(|dir| {
        let net = std::fs::read(dir.join("ACASXU_run2a_1_1_batch_2000.onnx")).ok()?;
        let prop = std::fs::read_to_string(dir.join("prop_1.vnnlib")).ok()?;
        Some((net, prop))
    });
    let started = Instant::now();
    let (label, graph, prop, oracle) = match acas {
        Some((net, prop)) => ("ACAS-Xu 1_1 property 1", onnx::parse(&net).unwrap(), vnnlib::parse(&prop).unwrap(), None),
        None => {
            let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
            let text = std::fs::read_to_string(dir.join("surrogate.nnet")).unwrap();
            let model = nnet::parse(&text, nnet::Normalization::Fold).unwrap();
            let prop = vnnlib::parse(&std::fs::read_to_string(dir.join("surrogate_prop.vnnlib")).unwrap()).unwrap();
            let layers = model
                .graph
                .nodes
                .iter()
                .filter_map(|n| match &n.op {
                    Op::Affine { weight, bias } => Some((weight.clone(), bias.clone())),
                    _ => None,
                })
                .collect();
            let mlp = Mlp { layers };
            let rhs = match &prop.predicate {
                Predicate::Atom(a) => a.rhs,
                _ => f64::NAN,
            };
            let verified = surrogate_oracle(&mlp, &prop.input_box, 0, rhs);
            ("bundled 5-input/50-neuron surrogate", model.graph, prop, Some(verified))
        }
    };
    let problem = Problem::new(graph, prop, &cfg).unwrap();
    let out = verify(&problem, SplitMode::Input, &cfg, &BabConfig::default(), Some(started + budget)).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let oracle_ok = oracle.unwrap_or(true);
    outcome(
        out.verdict.status == Status::True && oracle_ok && secs < budget.as_secs_f64(),
        format!(
            "{label}: {:?} after {} subproblems in {secs:.2}s{}",
            out.verdict.status,
            out.stats.analysed,
            match oracle {
                Some(v) => format!(", oracle verified the property: {v}"),
                None => String::new(),
            }
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("soundness fuzz", criterion_1),
        ("interval table", criterion_2),
        ("zonotope exactness on affine nets", criterion_3),
        ("dual bound validity and quality", criterion_4),
        ("hybrid zonotope exactness", criterion_5),
        ("branch and bound completeness", criterion_6),
        ("rewrite equivalence", criterion_7),
        ("worked example", criterion_8),
        ("end-to-end ACAS-Xu", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let line = format!("{} criterion {} ({name}): {}\n", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        std::io::Write::write_all(&mut std::io::stdout().lock(), line.as_bytes()).unwrap();
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
