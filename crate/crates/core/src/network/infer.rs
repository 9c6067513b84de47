use crate::error::{Error, Result};
use crate::interval::broadcast_index;

use super::{concat_indices, pool_windows, transpose_indices, NetworkGraph, Op, ValueRef};

/// Softmax over the last axis of a row-major tensor.
pub fn softmax(x: &[f64], last: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(last.max(1)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / s));
    }
    out
}

fn matvec(w: &ndarray::Array2<f64>, x: &[f64]) -> Vec<f64> {
    w.rows().into_iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

impl NetworkGraph {
    /// Concrete forward pass on a flattened input.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        let values = self.infer_all(x)?;
        Ok(match self.output {
            ValueRef::Input => x.to_vec(),
            ValueRef::Node(i) => values[i].clone(),
        })
    }

    /// Values of every node in order.
    pub fn infer_all(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_len() {
            return Err(Error::Dimension { expected: self.input_len(), found: x.len() });
        }
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let arg = |k: usize| -> &[f64] {
                match node.inputs[k] {
                    ValueRef::Input => x,
                    ValueRef::Node(j) => &values[j],
                }
            };
            let shape = |k: usize| self.shape_of(node.inputs[k]);
            let v = match &node.op {
                Op::Affine { weight, bias } => matvec(weight, arg(0)).iter().zip(bias).map(|(a, b)| a + b).collect(),
                Op::MatMul { weight } => matvec(weight, arg(0)),
                Op::Conv2d(c) => {
                    let (w, b) = c.to_dense(shape(0))?;
                    matvec(&w, arg(0)).iter().zip(&b).map(|(a, b)| a + b).collect()
                }
                Op::Relu => arg(0).iter().map(|v| v.max(0.0)).collect(),
                Op::Sigmoid => arg(0).iter().map(|&v| crate::interval::sigmoid(v)).collect(),
                Op::Tanh => arg(0).iter().map(|v| v.tanh()).collect(),
                Op::Cast { mode } => arg(0).iter().map(|&v| mode.apply(v)).collect(),
                Op::Softmax => softmax(arg(0), *shape(0).last().unwrap_or(&1)),
                Op::MaxPool { kernel, stride } => pool_windows(shape(0), *kernel, *stride)
                    .iter()
                    .map(|win| win.iter().map(|&i| arg(0)[i]).fold(f64::NEG_INFINITY, f64::max))
                    .collect(),
                Op::Add => {
                    let (a, b) = (arg(0), arg(1));
                    let ia = broadcast_index(&node.shape, shape(0));
                    let ib = broadcast_index(&node.shape, shape(1));
                    ia.iter().zip(&ib).map(|(&i, &j)| a[i] + b[j]).collect()
                }
                Op::BiasAdd { bias, shape: bs } => {
                    let a = arg(0);
                    a.iter().zip(broadcast_index(&node.shape, bs)).map(|(v, j)| v + bias[j]).collect()
                }
                Op::Flatten | Op::Reshape { .. } => arg(0).to_vec(),
                Op::Transpose { perm } => transpose_indices(shape(0), perm).iter().map(|&i| arg(0)[i]).collect(),
                Op::Concat { axis } => {
                    let shapes: Vec<&[usize]> = (0..node.inputs.len()).map(shape).collect();
                    concat_indices(&shapes, *axis).iter().map(|&(p, i)| arg(p)[i]).collect()
                }
                Op::Constant { value, .. } => value.clone(),
            };
            values.push(v);
        }
        Ok(values)
    }
}
