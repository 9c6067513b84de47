//! Verification-oriented graph rewrites.

use ndarray::Array2;

use crate::error::Result;
use crate::interval::broadcast_index;

use super::{pool_windows, GraphBuilder, NetworkGraph, Node, Op, ValueRef};

enum Action {
    /// Forward every use of the node to another value.
    Alias(ValueRef),
    Replace(Op, Vec<ValueRef>),
}

/// Rebuild `g`, letting `f` expand individual nodes. `f` receives inputs
/// already mapped into the new graph and returns the node's new value.
fn replay<F>(g: &NetworkGraph, mut f: F) -> Result<NetworkGraph>
where
    F: FnMut(&mut GraphBuilder, usize, &Node, &[ValueRef]) -> Result<ValueRef>,
{
    let mut b = GraphBuilder::new(g.input_name.clone(), g.input_shape.clone());
    let mut map: Vec<ValueRef> = Vec::with_capacity(g.nodes.len());
    let remap = |v: &ValueRef, map: &[ValueRef]| match v {
        ValueRef::Input => ValueRef::Input,
        ValueRef::Node(j) => map[*j],
    };
    for (i, n) in g.nodes.iter().enumerate() {
        let inputs: Vec<ValueRef> = n.inputs.iter().map(|v| remap(v, &map)).collect();
        let v = f(&mut b, i, n, &inputs)?;
        map.push(v);
    }
    let out = remap(&g.output, &map);
    Ok(b.finish(out)?.prune())
}

fn apply(g: &NetworkGraph, target: usize, action: Action) -> Result<NetworkGraph> {
    let mut new_refs: Vec<ValueRef> = Vec::new();
    let (alias, replace) = match action {
        Action::Alias(v) => (Some(v), None),
        Action::Replace(op, inputs) => (None, Some((op, inputs))),
    };
    replay(g, |b, i, n, inputs| {
        let map_old = |v: &ValueRef, refs: &[ValueRef]| match v {
            ValueRef::Input => ValueRef::Input,
            ValueRef::Node(j) => refs[*j],
        };
        let v = if i != target {
            b.push(n.name.clone(), n.op.clone(), inputs)?
        } else if let Some(a) = &alias {
            map_old(a, &new_refs)
        } else {
            let (op, old_inputs) = replace.clone().expect("replace action");
            let ins: Vec<ValueRef> = old_inputs.iter().map(|v| map_old(v, &new_refs)).collect();
            b.push(n.name.clone(), op, &ins)?
        };
        new_refs.push(v);
        Ok(v)
    })
}

fn compose_perm(first: &[usize], second: &[usize]) -> Vec<usize> {
    second.iter().map(|&p| first[p]).collect()
}

fn is_identity(perm: &[usize]) -> bool {
    perm.iter().enumerate().all(|(i, &p)| i == p)
}

fn find_action(g: &NetworkGraph, argmax_invariant: bool) -> Option<(usize, Action)> {
    let fan_out = g.fan_out();
    let producer = |v: &ValueRef| match v {
        ValueRef::Node(j) => Some((*j, &g.nodes[*j])),
        ValueRef::Input => None,
    };
    if argmax_invariant {
        if let Some((j, n)) = producer(&g.output) {
            if n.op == Op::Softmax {
                return Some((j, Action::Alias(n.inputs[0])));
            }
        }
    }
    for (i, n) in g.nodes.iter().enumerate() {
        let src = n.inputs.first().and_then(producer);
        match (&n.op, src) {
            (Op::Affine { .. } | Op::MatMul { .. }, Some((_, p))) if matches!(p.op, Op::Reshape { .. } | Op::Flatten) => {
                return Some((i, Action::Replace(n.op.clone(), p.inputs.clone())));
            }
            (Op::BiasAdd { bias, shape }, Some((j, p))) if fan_out[j] == 1 => {
                let full: Vec<f64> = broadcast_index(&n.shape, shape).into_iter().map(|k| bias[k]).collect();
                let fused = match &p.op {
                    Op::MatMul { weight } => Op::Affine { weight: weight.clone(), bias: full },
                    Op::Affine { weight, bias: b0 } => {
                        Op::Affine { weight: weight.clone(), bias: b0.iter().zip(&full).map(|(a, b)| a + b).collect() }
                    }
                    _ => continue,
                };
                return Some((i, Action::Replace(fused, p.inputs.clone())));
            }
            (Op::Transpose { perm }, _) if is_identity(perm) => return Some((i, Action::Alias(n.inputs[0]))),
            (Op::Transpose { perm }, Some((_, p))) => {
                if let Op::Transpose { perm: inner } = &p.op {
                    let composed = compose_perm(inner, perm);
                    return Some((i, Action::Replace(Op::Transpose { perm: composed }, p.inputs.clone())));
                }
            }
            (Op::Reshape { .. } | Op::Flatten, _) if g.shape_of(n.inputs[0]) == n.shape.as_slice() => {
                return Some((i, Action::Alias(n.inputs[0])));
            }
            (Op::Reshape { .. } | Op::Flatten, Some((_, p))) if matches!(p.op, Op::Reshape { .. } | Op::Flatten) => {
                return Some((i, Action::Replace(Op::Reshape { shape: n.shape.clone() }, p.inputs.clone())));
            }
            _ => {}
        }
    }
    None
}

/// Apply the simplifications to a fixpoint. A trailing softmax is only
/// removed when `argmax_invariant` is set.
pub fn simplify(g: &NetworkGraph, argmax_invariant: bool) -> Result<NetworkGraph> {
    let mut g = g.prune();
    while let Some((target, action)) = find_action(&g, argmax_invariant) {
        g = apply(&g, target, action)?;
    }
    Ok(g)
}

/// Replace every max-pooling node by pairwise `max(a, b) = relu(a - b) + b`
/// stages arranged as a balanced tree over each window.
pub fn rewrite_maxpool(g: &NetworkGraph) -> Result<NetworkGraph> {
    replay(g, |b, _, n, inputs| {
        let Op::MaxPool { kernel, stride } = &n.op else {
            return b.push(n.name.clone(), n.op.clone(), inputs);
        };
        let src_shape = b.shape_of(inputs[0]).to_vec();
        let src_len: usize = src_shape.iter().product();
        let mut windows = pool_windows(&src_shape, *kernel, *stride);
        let mut cur = inputs[0];
        let mut width = src_len;
        let mut stage = 0;
        while windows.iter().any(|w| w.len() > 1) {
            let pairs: usize = windows.iter().map(|w| w.len().div_ceil(2)).sum();
            let mut diff = Array2::zeros((pairs, width));
            let mut base = Array2::zeros((pairs, width));
            let mut next = Vec::with_capacity(windows.len());
            let mut row = 0;
            for w in &windows {
                let mut out = Vec::with_capacity(w.len().div_ceil(2));
                for pair in w.chunks(2) {
                    let (a, c) = (pair[0], *pair.get(1).unwrap_or(&pair[0]));
                    diff[[row, a]] += 1.0;
                    diff[[row, c]] -= 1.0;
                    base[[row, c]] = 1.0;
                    out.push(row);
                    row += 1;
                }
                next.push(out);
            }
            let d = b.push(format!("{}_diff{stage}", n.name), Op::MatMul { weight: diff }, &[cur])?;
            let r = b.push(format!("{}_relu{stage}", n.name), Op::Relu, &[d])?;
            let s = b.push(format!("{}_base{stage}", n.name), Op::MatMul { weight: base }, &[cur])?;
            cur = b.push(format!("{}_max{stage}", n.name), Op::Add, &[r, s])?;
            windows = next;
            width = pairs;
            stage += 1;
        }
        if stage == 0 {
            let mut sel = Array2::zeros((windows.len(), width));
            for (k, w) in windows.iter().enumerate() {
                sel[[k, w[0]]] = 1.0;
            }
            cur = b.push(format!("{}_select", n.name), Op::MatMul { weight: sel }, &[cur])?;
        }
        b.push(n.name.clone(), Op::Reshape { shape: n.shape.clone() }, &[cur])
    })
}

/// Append `z = C y + c` after the output.
pub fn append_affine(g: &NetworkGraph, name: &str, weight: Array2<f64>, bias: Vec<f64>) -> Result<NetworkGraph> {
    let mut b = GraphBuilder::new(g.input_name.clone(), g.input_shape.clone());
    replay_into(g, &mut b)?;
    let z = b.push(name, Op::Affine { weight, bias }, &[g.output])?;
    b.finish(z)
}

/// Append `z = [C | D] [y; x] + c`, reading the network input as well.
pub fn append_affine_with_input(g: &NetworkGraph, name: &str, weight: Array2<f64>, bias: Vec<f64>) -> Result<NetworkGraph> {
    let mut b = GraphBuilder::new(g.input_name.clone(), g.input_shape.clone());
    replay_into(g, &mut b)?;
    let y = b.push(format!("{name}_y"), Op::Flatten, &[g.output])?;
    let x = b.push(format!("{name}_x"), Op::Flatten, &[ValueRef::Input])?;
    let yx = b.push(format!("{name}_concat"), Op::Concat { axis: 0 }, &[y, x])?;
    let z = b.push(name, Op::Affine { weight, bias }, &[yx])?;
    b.finish(z)
}

fn replay_into(g: &NetworkGraph, b: &mut GraphBuilder) -> Result<()> {
    for n in &g.nodes {
        b.push(n.name.clone(), n.op.clone(), &n.inputs)?;
    }
    Ok(())
}
