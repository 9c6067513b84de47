//! One forward pass over the graph with the box domain and any relational
//! domains running side by side.

use std::time::Instant;

use ndarray::Array2;

use super::{
    attack, boxes, elapsed, influence_of, Analysis, AnalysisConfig, Counterexample, DomainKind, Problem, Region, Relations,
    ReluInfo, Stats, Status, Verdict,
};
use crate::constrained::{ConstrainedZonotope, NeuronRef, Sign};
use crate::error::{Error, Result};
use crate::hybrid::HybridZonotope;
use crate::interval::{broadcast_index, IntervalTensor, Rounding};
use crate::network::{concat_indices, transpose_indices, NetworkGraph, Node, Op, ValueRef};
use crate::property::Tri;
use crate::relax;
use crate::zonotope::{Allocator, SymbolId, Zonotope};

/// Linear transformers shared by the zonotope family.
trait Form: Sized + Clone {
    const KIND: DomainKind;
    fn lift(z: Zonotope, limit: usize) -> Self;
    fn affine(&self, w: &Array2<f64>, c: Option<&[f64]>, r: Rounding) -> Result<Self>;
    fn translate(&self, c: &[f64], r: Rounding) -> Result<Self>;
    fn select(&self, idx: &[usize]) -> Self;
    fn add(&self, o: &Self, r: Rounding) -> Result<Self>;
    fn concat(parts: &[&Self]) -> Self;
    fn dim(&self) -> usize;
    fn noise(&self) -> usize;
}

impl Form for Zonotope {
    const KIND: DomainKind = DomainKind::Zonotope;
    fn lift(z: Zonotope, _: usize) -> Self {
        z
    }
    fn affine(&self, w: &Array2<f64>, c: Option<&[f64]>, r: Rounding) -> Result<Self> {
        Zonotope::affine(self, w, c, r)
    }
    fn translate(&self, c: &[f64], r: Rounding) -> Result<Self> {
        Zonotope::translate(self, c, r)
    }
    fn select(&self, idx: &[usize]) -> Self {
        Zonotope::select(self, idx)
    }
    fn add(&self, o: &Self, r: Rounding) -> Result<Self> {
        Zonotope::add(self, o, r)
    }
    fn concat(parts: &[&Self]) -> Self {
        Zonotope::concat(parts)
    }
    fn dim(&self) -> usize {
        Zonotope::dim(self)
    }
    fn noise(&self) -> usize {
        self.noise_count()
    }
}

impl Form for ConstrainedZonotope {
    const KIND: DomainKind = DomainKind::Constrained;
    fn lift(z: Zonotope, _: usize) -> Self {
        ConstrainedZonotope::from_zonotope(z)
    }
    fn affine(&self, w: &Array2<f64>, c: Option<&[f64]>, r: Rounding) -> Result<Self> {
        ConstrainedZonotope::affine(self, w, c, r)
    }
    fn translate(&self, c: &[f64], r: Rounding) -> Result<Self> {
        ConstrainedZonotope::translate(self, c, r)
    }
    fn select(&self, idx: &[usize]) -> Self {
        ConstrainedZonotope::select(self, idx)
    }
    fn add(&self, o: &Self, r: Rounding) -> Result<Self> {
        ConstrainedZonotope::add(self, o, r)
    }
    fn concat(parts: &[&Self]) -> Self {
        ConstrainedZonotope::concat(parts)
    }
    fn dim(&self) -> usize {
        ConstrainedZonotope::dim(self)
    }
    fn noise(&self) -> usize {
        self.body.noise_count()
    }
}

impl Form for HybridZonotope {
    const KIND: DomainKind = DomainKind::Hybrid;
    fn lift(z: Zonotope, limit: usize) -> Self {
        HybridZonotope::from_zonotope(&z, limit)
    }
    fn affine(&self, w: &Array2<f64>, c: Option<&[f64]>, r: Rounding) -> Result<Self> {
        HybridZonotope::affine(self, w, c, r)
    }
    fn translate(&self, c: &[f64], r: Rounding) -> Result<Self> {
        HybridZonotope::translate(self, c, r)
    }
    fn select(&self, idx: &[usize]) -> Self {
        HybridZonotope::select(self, idx)
    }
    fn add(&self, o: &Self, r: Rounding) -> Result<Self> {
        HybridZonotope::add(self, o, r)
    }
    fn concat(parts: &[&Self]) -> Self {
        HybridZonotope::concat(parts)
    }
    fn dim(&self) -> usize {
        HybridZonotope::dim(self)
    }
    fn noise(&self) -> usize {
        self.symbols.len() + self.binary_count()
    }
}

/// Relational image of a linear op; `None` for nonlinear ops.
fn linear<F: Form>(node: &Node, args: &[&F], shapes: &[&[usize]], limit: usize, r: Rounding) -> Result<Option<F>> {
    let out = match &node.op {
        Op::Affine { weight, bias } => args[0].affine(weight, Some(bias), r)?,
        Op::MatMul { weight } => args[0].affine(weight, None, r)?,
        Op::Conv2d(c) => {
            let (w, b) = c.to_dense(shapes[0])?;
            args[0].affine(&w, Some(&b), r)?
        }
        Op::BiasAdd { bias, shape } => {
            let c: Vec<f64> = broadcast_index(&node.shape, shape).iter().map(|&j| bias[j]).collect();
            args[0].translate(&c, r)?
        }
        Op::Add => {
            let side = |k: usize| {
                if shapes[k] == node.shape.as_slice() {
                    args[k].clone()
                } else {
                    args[k].select(&broadcast_index(&node.shape, shapes[k]))
                }
            };
            side(0).add(&side(1), r)?
        }
        Op::Flatten | Op::Reshape { .. } => args[0].clone(),
        Op::Transpose { perm } => args[0].select(&transpose_indices(shapes[0], perm)),
        Op::Concat { axis } => {
            let cat = F::concat(args);
            let mut offsets = vec![0];
            for a in args {
                offsets.push(offsets.last().unwrap() + a.dim());
            }
            let idx: Vec<usize> = concat_indices(shapes, *axis).iter().map(|&(p, i)| offsets[p] + i).collect();
            if idx.iter().enumerate().all(|(k, &i)| k == i) {
                cat
            } else {
                cat.select(&idx)
            }
        }
        Op::Constant { value, .. } => F::lift(Zonotope::constant(value.clone()), limit),
        _ => return Ok(None),
    };
    Ok(Some(out))
}

#[derive(Clone)]
struct State {
    bx: IntervalTensor,
    zono: Option<Zonotope>,
    cz: Option<ConstrainedZonotope>,
    hz: Option<HybridZonotope>,
}

/// Elementwise intersection. In fast mode a crossing within float noise is
/// tolerated rather than reported as emptiness.
fn meet(a: &mut IntervalTensor, b: &IntervalTensor, r: Rounding) -> bool {
    for i in 0..a.len() {
        let lo = a.lower[i].max(b.lower[i]);
        let hi = a.upper[i].min(b.upper[i]);
        if lo <= hi {
            a.lower[i] = lo;
            a.upper[i] = hi;
        } else if !r.is_sound() && lo - hi <= 1e-9 * (1.0 + lo.abs().max(hi.abs())) {
            a.lower[i] = hi;
            a.upper[i] = lo;
        } else {
            return false;
        }
    }
    true
}

/// Output of [`forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// Intersection of all domains at the graph output.
    pub bounds: IntervalTensor,
    /// Same, at the node requested as tap.
    pub tap: Option<IntervalTensor>,
    pub boxed: IntervalTensor,
    pub zonotope: Option<Zonotope>,
    pub constrained: Option<ConstrainedZonotope>,
    pub hybrid: Option<HybridZonotope>,
    pub relations: Relations,
    /// Noise symbols of the input dimensions, in order.
    pub inputs: Vec<SymbolId>,
    pub stats: Stats,
}

struct Pending {
    info: ReluInfo,
    cz_symbol: Option<SymbolId>,
    zono_symbol: Option<SymbolId>,
}

struct Pass<'a> {
    cfg: &'a AnalysisConfig,
    r: Rounding,
    alloc: Allocator,
    inputs: Vec<SymbolId>,
    stats: Stats,
    pending: Vec<Pending>,
}

impl<'a> Pass<'a> {
    fn drop_domain(&mut self, kind: DomainKind, node: &Node, e: &Error) {
        log::warn!("{} domain dropped at node {}: {e}", kind.name(), node.name);
        self.stats.dropped_domains.push(format!("{} at {}: {e}", kind.name(), node.name));
    }

    fn keep<T>(&mut self, kind: DomainKind, node: &Node, res: Result<T>) -> Option<T> {
        match res {
            Ok(v) => Some(v),
            Err(e) => {
                self.drop_domain(kind, node, &e);
                None
            }
        }
    }

    /// Bounds of a state: box met with every relational concretization.
    /// `None` when the state is provably empty.
    fn bounds(&self, s: &State, precise: bool) -> Option<IntervalTensor> {
        let r = self.r;
        let mut b = s.bx.clone();
        if let Some(z) = &s.zono {
            if !meet(&mut b, &z.concretize(r), r) {
                return None;
            }
        }
        if let Some(cz) = &s.cz {
            let c = if cz.constraint_count() > 0 {
                let db = cz.concretize_dual(&self.cfg.dual, r);
                if db.empty {
                    return None;
                }
                db.bounds
            } else {
                cz.concretize(r)
            };
            if !meet(&mut b, &c, r) {
                return None;
            }
        }
        if let Some(hz) = &s.hz {
            let mut c = hz.concretize_relaxed(r);
            if precise && hz.constraint_count() > 0 {
                if let Ok(db) = hz.concretize_enum(&self.cfg.dual, r) {
                    if db.empty {
                        return None;
                    }
                    c = db.bounds;
                }
            }
            if !meet(&mut b, &c, r) {
                return None;
            }
        }
        Some(b)
    }

    fn lift_all(&mut self, s: &mut State, bx: &IntervalTensor, node: &Node, which: [bool; 3]) {
        let (r, limit) = (self.r, self.cfg.binary_limit);
        if !(which[0] && s.zono.is_some() || which[1] && s.cz.is_some() || which[2] && s.hz.is_some()) {
            return;
        }
        let z = match Zonotope::from_box(bx, &mut self.alloc, r) {
            Ok(z) => z,
            Err(e) => {
                for (k, kind) in [DomainKind::Zonotope, DomainKind::Constrained, DomainKind::Hybrid].into_iter().enumerate() {
                    if which[k] {
                        self.drop_domain(kind, node, &e);
                    }
                }
                s.zono = s.zono.take().filter(|_| !which[0]);
                s.cz = s.cz.take().filter(|_| !which[1]);
                s.hz = s.hz.take().filter(|_| !which[2]);
                return;
            }
        };
        if which[0] && s.zono.is_some() {
            s.zono = Some(z.clone());
        }
        if which[1] && s.cz.is_some() {
            s.cz = Some(ConstrainedZonotope::from_zonotope(z.clone()));
        }
        if which[2] && s.hz.is_some() {
            s.hz = Some(HybridZonotope::from_zonotope(&z, limit));
        }
    }

    fn linear_step<F: Form>(&mut self, node: &Node, args: Vec<Option<&F>>, shapes: &[&[usize]]) -> Option<F> {
        let args: Option<Vec<&F>> = args.into_iter().collect();
        let res = linear(node, &args?, shapes, self.cfg.binary_limit, self.r);
        self.keep(F::KIND, node, res).flatten()
    }

    fn nonlinear(&mut self, idx: usize, node: &Node, arg: &State, shape: &[usize], splits: &Region) -> Option<State> {
        let r = self.r;
        let mut pre = self.bounds(arg, false)?;
        let mut forced: Vec<Option<Sign>> = vec![None; pre.len()];
        if matches!(node.op, Op::Relu) {
            let lo = NeuronRef { node: idx, index: 0 };
            let hi = NeuronRef { node: idx + 1, index: 0 };
            for (n, &sign) in splits.splits.range(lo..hi) {
                if n.index >= pre.len() {
                    continue;
                }
                let i = n.index;
                match sign {
                    Sign::Pos => pre.lower[i] = pre.lower[i].max(0.0),
                    Sign::Neg => pre.upper[i] = pre.upper[i].min(0.0),
                }
                if pre.lower[i] > pre.upper[i] {
                    return None;
                }
                forced[i] = Some(sign);
            }
        }
        let pre_shaped = pre.clone().reshaped(shape.to_vec()).ok()?;
        let bx = match boxes::apply(node, &[&pre_shaped], &[shape], r) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("box transformer failed at {}: {e}", node.name);
                return None;
            }
        };
        let mut out = State { bx: bx.clone(), zono: None, cz: None, hz: None };
        let flat = IntervalTensor { shape: vec![pre.len()], ..pre.clone() };
        match &node.op {
            Op::Relu => {
                let rx: Vec<relax::Relax> = (0..pre.len())
                    .map(|i| match forced[i] {
                        Some(_) => relax::Relax::Identity,
                        None => relax::relu(pre.lower[i], pre.upper[i], r).unwrap_or(relax::Relax::Identity),
                    })
                    .collect();
                let cz_start = self.alloc.issued_symbols() as SymbolId;
                if let Some(cz) = &arg.cz {
                    let res = cz.relu_with_splits(&flat, &forced, &mut self.alloc, r);
                    out.cz = self.keep(DomainKind::Constrained, node, res);
                }
                let zono_start = self.alloc.issued_symbols() as SymbolId;
                if let Some(z) = &arg.zono {
                    let res = z.relu(&flat, &mut self.alloc, r);
                    out.zono = self.keep(DomainKind::Zonotope, node, res);
                }
                if let Some(h) = &arg.hz {
                    let res = h.relu_exact(&flat, &mut self.alloc, r).map(|(h, _)| h);
                    out.hz = self.keep(DomainKind::Hybrid, node, res);
                }
                let mut k = 0;
                for i in 0..pre.len() {
                    let symbol = rx[i].needs_symbol().then(|| {
                        k += 1;
                        k - 1
                    });
                    if forced[i].is_none() && pre.lower[i] < 0.0 && pre.upper[i] > 0.0 {
                        self.pending.push(Pending {
                            info: ReluInfo { neuron: NeuronRef { node: idx, index: i }, lower: pre.lower[i], upper: pre.upper[i], influence: 0.0 },
                            cz_symbol: symbol.filter(|_| out.cz.is_some()).map(|k| cz_start + k),
                            zono_symbol: symbol.filter(|_| out.zono.is_some()).map(|k| zono_start + k),
                        });
                    }
                }
            }
            Op::Sigmoid | Op::Tanh | Op::Cast { .. } => {
                let apply = |z: &Zonotope, alloc: &mut Allocator| match &node.op {
                    Op::Sigmoid => z.sigmoid(&flat, alloc, r),
                    Op::Tanh => z.tanh(&flat, alloc, r),
                    Op::Cast { mode } => z.cast(*mode, &flat, alloc, r),
                    _ => unreachable!(),
                };
                if let Some(cz) = &arg.cz {
                    let res = apply(&cz.body, &mut self.alloc).map(|b| cz.with_body(b));
                    out.cz = self.keep(DomainKind::Constrained, node, res);
                }
                if let Some(z) = &arg.zono {
                    let res = apply(z, &mut self.alloc);
                    out.zono = self.keep(DomainKind::Zonotope, node, res);
                }
                out.hz = arg.hz.clone();
                self.lift_all(&mut out, &bx, node, [false, false, true]);
            }
            _ => {
                out.zono = arg.zono.clone();
                out.cz = arg.cz.clone();
                out.hz = arg.hz.clone();
                self.lift_all(&mut out, &bx, node, [true, true, true]);
            }
        }
        if let Some(max) = self.cfg.max_symbols {
            let inputs = self.inputs.clone();
            let protected = move |s: SymbolId| inputs.binary_search(&s).is_ok();
            if let Some(z) = &out.zono {
                out.zono = Some(z.reduce(max, &protected, &mut self.alloc, r));
            }
            if let Some(cz) = &out.cz {
                out.cz = Some(cz.reduce(max, &protected, &mut self.alloc, r));
            }
        }
        Some(out)
    }
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Propagate `region` through `graph`. Returns `Ok(None)` when the region is
/// provably empty and [`Error::Timeout`] when the deadline passes between
/// two layers.
pub fn forward(
    graph: &NetworkGraph,
    region: &Region,
    cfg: &AnalysisConfig,
    tap: Option<ValueRef>,
    deadline: Option<Instant>,
) -> Result<Option<Forward>> {
    let started = Instant::now();
    let r = cfg.rounding;
    if region.input_box.len() != graph.input_len() {
        return Err(Error::Dimension { expected: graph.input_len(), found: region.input_box.len() });
    }
    let mut pass = Pass { cfg, r, alloc: Allocator::new(), inputs: Vec::new(), stats: Stats::default(), pending: Vec::new() };
    let in_box = region.input_box.clone().reshaped(graph.input_shape.clone())?;
    let relational = [DomainKind::Zonotope, DomainKind::Constrained, DomainKind::Hybrid].iter().any(|&d| cfg.uses(d));
    let z0 = if relational { Some(Zonotope::from_box(&in_box, &mut pass.alloc, r)?) } else { None };
    pass.inputs = z0.as_ref().map_or(Vec::new(), |z| z.symbols.clone());
    let input = State {
        bx: in_box,
        zono: z0.clone().filter(|_| cfg.uses(DomainKind::Zonotope)),
        cz: z0.clone().filter(|_| cfg.uses(DomainKind::Constrained)).map(ConstrainedZonotope::from_zonotope),
        hz: z0.filter(|_| cfg.uses(DomainKind::Hybrid)).map(|z| HybridZonotope::from_zonotope(&z, cfg.binary_limit)),
    };

    let n = graph.nodes.len();
    let mut last_use = vec![0usize; n];
    for (i, node) in graph.nodes.iter().enumerate() {
        for v in &node.inputs {
            if let ValueRef::Node(j) = v {
                last_use[*j] = i;
            }
        }
    }
    for v in [Some(graph.output), tap].into_iter().flatten() {
        if let ValueRef::Node(j) = v {
            last_use[j] = usize::MAX;
        }
    }

    let mut values: Vec<Option<State>> = vec![None; n];
    for (i, node) in graph.nodes.iter().enumerate() {
        if past(deadline) {
            return Err(Error::Timeout);
        }
        let t0 = Instant::now();
        let state = {
            let args: Vec<&State> = node
                .inputs
                .iter()
                .map(|v| match v {
                    ValueRef::Input => &input,
                    ValueRef::Node(j) => values[*j].as_ref().expect("value freed before last use"),
                })
                .collect();
            let shapes: Vec<&[usize]> = node.inputs.iter().map(|&v| graph.shape_of(v)).collect();
            if node.op.is_activation() || matches!(node.op, Op::MaxPool { .. } | Op::Softmax) {
                match pass.nonlinear(i, node, args[0], shapes[0], region) {
                    Some(s) => s,
                    None => return Ok(None),
                }
            } else {
                let boxes: Vec<&IntervalTensor> = args.iter().map(|s| &s.bx).collect();
                let bx = boxes::apply(node, &boxes, &shapes, r)?;
                State {
                    bx,
                    zono: pass.linear_step(node, args.iter().map(|s| s.zono.as_ref()).collect(), &shapes),
                    cz: pass.linear_step(node, args.iter().map(|s| s.cz.as_ref()).collect(), &shapes),
                    hz: pass.linear_step(node, args.iter().map(|s| s.hz.as_ref()).collect(), &shapes),
                }
            }
        };
        let noise = [state.zono.as_ref().map(Form::noise), state.cz.as_ref().map(Form::noise), state.hz.as_ref().map(Form::noise)];
        pass.stats.max_symbols = pass.stats.max_symbols.max(noise.into_iter().flatten().max().unwrap_or(0));
        values[i] = Some(state);
        for v in &node.inputs {
            if let ValueRef::Node(j) = v {
                if last_use[*j] == i {
                    values[*j] = None;
                }
            }
        }
        if cfg.layer_timings {
            pass.stats.layer_secs.push((node.name.clone(), elapsed(t0.elapsed())));
        }
    }
    pass.stats.layers = n;

    let state_of = |v: ValueRef| match v {
        ValueRef::Input => &input,
        ValueRef::Node(j) => values[j].as_ref().expect("output retained"),
    };
    let out = state_of(graph.output).clone();
    let Some(bounds) = pass.bounds(&out, true) else { return Ok(None) };
    let tap = match tap {
        Some(v) if v != graph.output => pass.bounds(state_of(v), true),
        Some(_) => Some(bounds.clone()),
        None => None,
    };

    let relations = relations(&mut pass, &out, graph, region);
    pass.stats.unstable_relus = relations.relus.len();
    if cfg.layer_timings {
        pass.stats.elapsed_secs = Some(elapsed(started.elapsed()));
    }
    let out_len = out.bx.len();
    Ok(Some(Forward {
        bounds: IntervalTensor { shape: vec![out_len], ..bounds },
        tap,
        boxed: out.bx,
        zonotope: out.zono,
        constrained: out.cz,
        hybrid: out.hz,
        relations,
        inputs: pass.inputs,
        stats: pass.stats,
    }))
}

fn relations(pass: &mut Pass, out: &State, graph: &NetworkGraph, region: &Region) -> Relations {
    let relus = std::mem::take(&mut pass.pending)
        .into_iter()
        .map(|p| {
            let mut info = p.info;
            info.influence = match (&out.cz, &out.zono, p.cz_symbol, p.zono_symbol) {
                (Some(cz), _, Some(s), _) => influence_of(s, &cz.body.generators, &cz.body.symbols),
                (_, Some(z), _, Some(s)) => influence_of(s, &z.generators, &z.symbols),
                _ => 0.0,
            };
            info
        })
        .collect();
    let form = out.zono.clone().or_else(|| out.cz.as_ref().map(|c| c.body.clone())).or_else(|| out.hz.as_ref().map(|h| h.relaxed()));
    let mut input = form.map(|z| pass.inputs.iter().map(|&s| influence_of(s, &z.generators, &z.symbols)).collect::<Vec<_>>());
    if input.as_ref().is_none_or(|a| a.iter().all(|&v| v == 0.0)) {
        input = finite_difference_relation(graph, &region.input_box).or(input);
    }
    Relations { input, relus }
}

/// `sum_j |dy_j/dx_i| * (u_i - l_i)/2` by central differences at the box centre.
fn finite_difference_relation(graph: &NetworkGraph, b: &IntervalTensor) -> Option<Vec<f64>> {
    let c = b.center();
    let mut out = Vec::with_capacity(c.len());
    for i in 0..c.len() {
        let half = (b.upper[i] - b.lower[i]) / 2.0;
        if half <= 0.0 {
            out.push(0.0);
            continue;
        }
        let h = (half * 1e-3).max(1e-9);
        let mut p = c.clone();
        p[i] += h;
        let yp = graph.infer(&p).ok()?;
        p[i] -= 2.0 * h;
        let ym = graph.infer(&p).ok()?;
        let g: f64 = yp.iter().zip(&ym).map(|(a, b)| ((a - b) / (2.0 * h)).abs()).sum();
        out.push(if g.is_finite() { g * half } else { 0.0 });
    }
    Some(out)
}

/// Counterexample search, then a forward pass and predicate evaluation.
pub fn analyse(problem: &Problem, region: &Region, cfg: &AnalysisConfig, deadline: Option<Instant>) -> Result<Analysis> {
    let started = Instant::now();
    let timeout = || Analysis { verdict: Verdict::with_status(Status::Timeout), relations: Relations::default() };
    if past(deadline) {
        return Ok(timeout());
    }
    if cfg.attack.enabled {
        match attack::search_counterexample(problem, &region.input_box, &cfg.attack, cfg.seed, deadline) {
            Ok(Some(cex)) => {
                let mut verdict = Verdict::with_status(Status::False);
                verdict.counterexample = Some(cex);
                return Ok(Analysis { verdict, relations: Relations::default() });
            }
            Ok(None) => {}
            Err(Error::Timeout) => return Ok(timeout()),
            Err(e) => return Err(e),
        }
    }
    let fwd = match forward(&problem.graph, region, cfg, Some(problem.output), deadline) {
        Ok(f) => f,
        Err(Error::Timeout) => return Ok(timeout()),
        Err(e) => return Err(e),
    };
    let Some(fwd) = fwd else {
        let mut verdict = Verdict::with_status(Status::True);
        verdict.empty = true;
        return Ok(Analysis { verdict, relations: Relations::default() });
    };
    let tri = problem.predicate.evaluate(&fwd.bounds, Some(&region.input_box), cfg.rounding);
    let mut verdict = Verdict::with_status(Status::from_tri(tri));
    if tri == Tri::False {
        verdict.counterexample = confirm_any(problem, &region.input_box);
        if verdict.counterexample.is_none() {
            verdict.status = Status::Unknown;
        }
    }
    if verdict.status == Status::Unknown {
        verdict.counterexample = extreme_points(&fwd, problem, &region.input_box, cfg.rounding).iter().find_map(|x| problem.confirm(x));
        if verdict.counterexample.is_some() {
            verdict.status = Status::False;
        }
    }
    verdict.output_bounds = fwd.tap;
    verdict.stats = fwd.stats;
    if cfg.layer_timings {
        verdict.stats.elapsed_secs = Some(elapsed(started.elapsed()));
    }
    Ok(Analysis { verdict, relations: fwd.relations })
}

/// Largest noise count for which candidate points come from the simplex
/// solver rather than from the unconstrained sign vector.
const LP_SYMBOL_LIMIT: usize = 400;

/// Inputs that maximise each atom's left-hand side over the final
/// relational form. Exact on regions where every ReLU is fixed.
fn extreme_points(fwd: &Forward, problem: &Problem, b: &IntervalTensor, r: Rounding) -> Vec<Vec<f64>> {
    let (body, cz) = match (&fwd.constrained, &fwd.zonotope) {
        (Some(cz), _) => (&cz.body, Some(cz)),
        (None, Some(z)) => (z, None),
        _ => return Vec::new(),
    };
    let m = body.noise_count();
    let slot: Vec<Option<usize>> = fwd.inputs.iter().map(|s| body.symbols.binary_search(s).ok()).collect();
    let mid_rad: Vec<(f64, f64)> = b.iter().map(|iv| crate::interval::mid_rad(r, iv.lo, iv.hi)).collect();
    let mut points = Vec::new();
    for atom in problem.predicate.atoms() {
        let mut alpha = vec![0.0; m];
        for &(j, c) in &atom.outputs {
            if j >= body.dim() {
                continue;
            }
            for (k, g) in body.generators.row(j).iter().enumerate() {
                alpha[k] -= c * g;
            }
        }
        for &(i, d) in &atom.inputs {
            if let Some(Some(k)) = slot.get(i) {
                alpha[*k] -= d * mid_rad[i].1;
            }
        }
        let eps = match cz {
            Some(cz) if cz.constraint_count() > 0 && m <= LP_SYMBOL_LIMIT => match cz.lp_minimizer(&alpha) {
                Some(e) => e,
                None => continue,
            },
            _ => alpha.iter().map(|&a| if a > 0.0 { -1.0 } else { 1.0 }).collect(),
        };
        let x: Vec<f64> = (0..b.len())
            .map(|i| {
                let (c, rad) = mid_rad[i];
                let e = slot.get(i).copied().flatten().map_or(0.0, |k| eps[k]);
                (c + rad * e).clamp(b.lower[i], b.upper[i])
            })
            .collect();
        points.push(x);
    }
    points
}

/// Concrete confirmation when the abstraction already refutes the property
/// on the whole region.
fn confirm_any(problem: &Problem, b: &IntervalTensor) -> Option<Counterexample> {
    [b.center(), b.lower.clone(), b.upper.clone()].iter().find_map(|x| problem.confirm(x))
}
