//! Box-domain transformer for every graph op.

use crate::error::Result;
use crate::interval::{broadcast_index, iv_matmul, iv_monotone, IntervalTensor, Monotone, Rounding};
use crate::network::{concat_indices, pool_windows, transpose_indices, Node, Op};
use crate::relax::CastMode;

fn gather(t: &IntervalTensor, idx: &[usize]) -> IntervalTensor {
    IntervalTensor {
        shape: vec![idx.len()],
        lower: idx.iter().map(|&i| t.lower[i]).collect(),
        upper: idx.iter().map(|&i| t.upper[i]).collect(),
    }
}

fn shift(t: IntervalTensor, c: &[f64], r: Rounding) -> IntervalTensor {
    let lower = t.lower.iter().zip(c).map(|(&a, &b)| r.add_lo(a, b)).collect();
    let upper = t.upper.iter().zip(c).map(|(&a, &b)| r.add_hi(a, b)).collect();
    IntervalTensor { shape: t.shape, lower, upper }
}

pub(crate) fn cast_monotone(mode: CastMode) -> Monotone {
    match mode {
        CastMode::Floor => Monotone::Floor,
        CastMode::Ceil => Monotone::Ceil,
        CastMode::Round => Monotone::Round,
    }
}

/// Softmax bounds per row: `1 / (1 + sum_{j != i} exp(x_j - x_i))` at the
/// extreme corners.
fn softmax(x: &IntervalTensor, last: usize, r: Rounding) -> IntervalTensor {
    let n = x.len();
    let mut lower = vec![0.0; n];
    let mut upper = vec![1.0; n];
    for start in (0..n).step_by(last.max(1)) {
        let row = start..(start + last).min(n);
        for i in row.clone() {
            let (mut big, mut small) = (0.0, 0.0);
            for j in row.clone().filter(|&j| j != i) {
                big = r.add_hi(big, r.exp(r.sub_hi(x.upper[j], x.lower[i])).1);
                small = r.add_lo(small, r.exp(r.sub_lo(x.lower[j], x.upper[i])).0);
            }
            lower[i] = r.div_lo(1.0, r.add_hi(1.0, big)).clamp(0.0, 1.0);
            upper[i] = r.div_hi(1.0, r.add_lo(1.0, small)).clamp(0.0, 1.0);
        }
    }
    IntervalTensor { shape: x.shape.clone(), lower, upper }
}

/// Image of `node` over its argument boxes, flattened to the node shape.
pub(crate) fn apply(node: &Node, args: &[&IntervalTensor], shapes: &[&[usize]], r: Rounding) -> Result<IntervalTensor> {
    let out = match &node.op {
        Op::Affine { weight, bias } => shift(iv_matmul(weight, args[0], r)?, bias, r),
        Op::MatMul { weight } => iv_matmul(weight, args[0], r)?,
        Op::Conv2d(c) => {
            let (w, b) = c.to_dense(shapes[0])?;
            shift(iv_matmul(&w, args[0], r)?, &b, r)
        }
        Op::BiasAdd { bias, shape } => {
            let c: Vec<f64> = broadcast_index(&node.shape, shape).iter().map(|&j| bias[j]).collect();
            shift(args[0].clone(), &c, r)
        }
        Op::Add => {
            let a = gather(args[0], &broadcast_index(&node.shape, shapes[0]));
            let b = gather(args[1], &broadcast_index(&node.shape, shapes[1]));
            let lower = a.lower.iter().zip(&b.lower).map(|(&x, &y)| r.add_lo(x, y)).collect();
            let upper = a.upper.iter().zip(&b.upper).map(|(&x, &y)| r.add_hi(x, y)).collect();
            IntervalTensor { shape: a.shape, lower, upper }
        }
        Op::Relu => iv_monotone(Monotone::Relu, args[0], r),
        Op::Sigmoid => iv_monotone(Monotone::Sigmoid, args[0], r),
        Op::Tanh => iv_monotone(Monotone::Tanh, args[0], r),
        Op::Cast { mode } => iv_monotone(cast_monotone(*mode), args[0], r),
        Op::Softmax => softmax(args[0], *shapes[0].last().unwrap_or(&1), r),
        Op::MaxPool { kernel, stride } => {
            let wins = pool_windows(shapes[0], *kernel, *stride);
            let fold = |v: &[f64], w: &[usize]| w.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
            IntervalTensor {
                shape: vec![wins.len()],
                lower: wins.iter().map(|w| fold(&args[0].lower, w)).collect(),
                upper: wins.iter().map(|w| fold(&args[0].upper, w)).collect(),
            }
        }
        Op::Flatten | Op::Reshape { .. } => args[0].clone(),
        Op::Transpose { perm } => gather(args[0], &transpose_indices(shapes[0], perm)),
        Op::Concat { axis } => {
            let idx = concat_indices(shapes, *axis);
            IntervalTensor {
                shape: vec![idx.len()],
                lower: idx.iter().map(|&(p, i)| args[p].lower[i]).collect(),
                upper: idx.iter().map(|&(p, i)| args[p].upper[i]).collect(),
            }
        }
        Op::Constant { value, .. } => IntervalTensor { shape: vec![value.len()], lower: value.clone(), upper: value.clone() },
    };
    out.reshaped(node.shape.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkGraph;

    #[test]
    fn softmax_encloses_samples() {
        let x = IntervalTensor::from_bounds(vec![-1.0, 0.0, 0.5], vec![1.0, 0.2, 2.0]).unwrap();
        let s = softmax(&x, 3, Rounding::Sound);
        for a in [-1.0, 0.0, 1.0] {
            for b in [0.0, 0.1, 0.2] {
                for c in [0.5, 1.0, 2.0] {
                    let y = crate::network::softmax(&[a, b, c], 3);
                    assert!(s.contains_point(&y), "{y:?} {s:?}");
                }
            }
        }
    }

    #[test]
    fn relu_of_symmetric_box() {
        let g = NetworkGraph::sequential(vec![1], vec![Op::Relu]).unwrap();
        let x = IntervalTensor::from_bounds(vec![-1.0], vec![1.0]).unwrap();
        let y = apply(&g.nodes[0], &[&x], &[&[1]], Rounding::Sound).unwrap();
        assert_eq!((y.lower[0], y.upper[0]), (0.0, 1.0));
    }
}
