//! Typed DAG of layers with shape validation and concrete inference.

mod infer;
pub mod json;
pub mod nnet;
pub mod onnx;
pub mod rewrite;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::broadcast_shapes;
use crate::relax::CastMode;

pub use infer::softmax;

/// 2-D convolution over `[channels, height, width]` tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    /// Row-major `[out_channels, in_channels, kernel_h, kernel_w]`.
    pub weight: Vec<f64>,
    pub weight_shape: [usize; 4],
    #[serde(default)]
    pub bias: Vec<f64>,
    #[serde(default = "one_pair")]
    pub stride: [usize; 2],
    /// `[top, left, bottom, right]`.
    #[serde(default)]
    pub padding: [usize; 4],
    #[serde(default = "one_pair")]
    pub dilation: [usize; 2],
}

fn one_pair() -> [usize; 2] {
    [1, 1]
}

/// Layer kinds. Matrices act on the flattened input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    /// `W x + b` with `W` of shape `out x in`.
    Affine {
        #[serde(with = "matrix_rows")]
        weight: Array2<f64>,
        bias: Vec<f64>,
    },
    Conv2d(Conv2d),
    Relu,
    Sigmoid,
    Tanh,
    /// Max over `kernel` windows of a `[channels, height, width]` tensor.
    MaxPool {
        kernel: [usize; 2],
        stride: [usize; 2],
    },
    /// Elementwise sum of two inputs, with broadcasting.
    Add,
    /// `W x` with `W` of shape `out x in`.
    MatMul {
        #[serde(with = "matrix_rows")]
        weight: Array2<f64>,
    },
    /// Adds a constant broadcast from `shape` to the input shape.
    BiasAdd { bias: Vec<f64>, shape: Vec<usize> },
    Flatten,
    Reshape { shape: Vec<usize> },
    Transpose { perm: Vec<usize> },
    Concat { axis: usize },
    /// Softmax over the last axis.
    Softmax,
    Cast { mode: CastMode },
    Constant { value: Vec<f64>, shape: Vec<usize> },
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Affine { .. } => "affine",
            Op::Conv2d(_) => "conv2d",
            Op::Relu => "relu",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::MaxPool { .. } => "max_pool",
            Op::Add => "add",
            Op::MatMul { .. } => "mat_mul",
            Op::BiasAdd { .. } => "bias_add",
            Op::Flatten => "flatten",
            Op::Reshape { .. } => "reshape",
            Op::Transpose { .. } => "transpose",
            Op::Concat { .. } => "concat",
            Op::Softmax => "softmax",
            Op::Cast { .. } => "cast",
            Op::Constant { .. } => "constant",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Op::Add => Some(2),
            Op::Concat { .. } => None,
            Op::Constant { .. } => Some(0),
            _ => Some(1),
        }
    }

    /// Whether the op is an activation handled neuron by neuron.
    pub fn is_activation(&self) -> bool {
        matches!(self, Op::Relu | Op::Sigmoid | Op::Tanh | Op::Cast { .. })
    }
}

/// Serde adapter storing a matrix as a list of rows.
pub(crate) mod matrix_rows {
    use ndarray::Array2;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        serde::Serialize::serialize(&rows, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("matrix rows have different lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), cols), flat).map_err(D::Error::custom)
    }
}

/// Source of a node input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueRef {
    Input,
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<ValueRef>,
    /// Output shape, inferred at construction.
    pub shape: Vec<usize>,
}

/// Validated, topologically ordered network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    pub input_name: String,
    pub input_shape: Vec<usize>,
    pub nodes: Vec<Node>,
    pub output: ValueRef,
}

/// Incremental construction with shape checking at every step.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    graph: NetworkGraph,
}

impl GraphBuilder {
    pub fn new(input_name: impl Into<String>, input_shape: Vec<usize>) -> Self {
        Self { graph: NetworkGraph { input_name: input_name.into(), input_shape, nodes: Vec::new(), output: ValueRef::Input } }
    }

    pub fn push(&mut self, name: impl Into<String>, op: Op, inputs: &[ValueRef]) -> Result<ValueRef> {
        let name = name.into();
        for v in inputs {
            if let ValueRef::Node(i) = v {
                if *i >= self.graph.nodes.len() {
                    return Err(Error::Graph(format!("node {name} refers to a later node")));
                }
            }
        }
        let shapes: Vec<&[usize]> = inputs.iter().map(|v| self.graph.shape_of(*v)).collect();
        let shape = output_shape(&op, &shapes).map_err(|e| Error::Graph(format!("node {name}: {e}")))?;
        self.graph.nodes.push(Node { name, op, inputs: inputs.to_vec(), shape });
        Ok(ValueRef::Node(self.graph.nodes.len() - 1))
    }

    /// Append `op` applied to the most recent value.
    pub fn then(&mut self, name: impl Into<String>, op: Op) -> Result<ValueRef> {
        let last = self.last();
        self.push(name, op, &[last])
    }

    pub fn last(&self) -> ValueRef {
        if self.graph.nodes.is_empty() {
            ValueRef::Input
        } else {
            ValueRef::Node(self.graph.nodes.len() - 1)
        }
    }

    pub fn shape_of(&self, v: ValueRef) -> &[usize] {
        self.graph.shape_of(v)
    }

    pub fn finish(mut self, output: ValueRef) -> Result<NetworkGraph> {
        self.graph.output = output;
        self.graph.validate()?;
        Ok(self.graph)
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Output shape of `op` for the given input shapes.
pub fn output_shape(op: &Op, inputs: &[&[usize]]) -> Result<Vec<usize>> {
    if let Some(n) = op.arity() {
        if inputs.len() != n {
            return Err(Error::Graph(format!("{} expects {n} inputs, got {}", op.kind(), inputs.len())));
        }
    } else if inputs.is_empty() {
        return Err(Error::Graph(format!("{} needs at least one input", op.kind())));
    }
    let first = inputs.first().copied().unwrap_or(&[]);
    match op {
        Op::Affine { weight, bias } => {
            if numel(first) != weight.ncols() {
                return Err(Error::Shape(format!("affine expects {} inputs, got shape {first:?}", weight.ncols())));
            }
            if bias.len() != weight.nrows() {
                return Err(Error::Shape(format!("bias length {} differs from {} rows", bias.len(), weight.nrows())));
            }
            Ok(vec![weight.nrows()])
        }
        Op::MatMul { weight } => {
            if numel(first) != weight.ncols() {
                return Err(Error::Shape(format!("matmul expects {} inputs, got shape {first:?}", weight.ncols())));
            }
            Ok(vec![weight.nrows()])
        }
        Op::Conv2d(c) => conv_output_shape(c, first),
        Op::Relu | Op::Sigmoid | Op::Tanh | Op::Cast { .. } => Ok(first.to_vec()),
        Op::Softmax => {
            if first.is_empty() {
                return Err(Error::Shape("softmax of a scalar".into()));
            }
            Ok(first.to_vec())
        }
        Op::MaxPool { kernel, stride } => {
            if first.len() != 3 {
                return Err(Error::Shape(format!("max_pool expects [C, H, W], got {first:?}")));
            }
            if kernel.contains(&0) || stride.contains(&0) || kernel[0] > first[1] || kernel[1] > first[2] {
                return Err(Error::Shape(format!("invalid pooling window {kernel:?}/{stride:?} on {first:?}")));
            }
            Ok(vec![first[0], (first[1] - kernel[0]) / stride[0] + 1, (first[2] - kernel[1]) / stride[1] + 1])
        }
        Op::Add => broadcast_shapes(inputs[0], inputs[1]),
        Op::BiasAdd { bias, shape } => {
            if bias.len() != numel(shape) {
                return Err(Error::Shape(format!("bias of {} values for shape {shape:?}", bias.len())));
            }
            let out = broadcast_shapes(first, shape)?;
            if out != first {
                return Err(Error::Shape(format!("bias shape {shape:?} would grow input {first:?}")));
            }
            Ok(out)
        }
        Op::Flatten => Ok(vec![numel(first)]),
        Op::Reshape { shape } => {
            if numel(shape) != numel(first) {
                return Err(Error::Shape(format!("cannot reshape {first:?} to {shape:?}")));
            }
            Ok(shape.clone())
        }
        Op::Transpose { perm } => {
            let mut seen = vec![false; first.len()];
            if perm.len() != first.len() || perm.iter().any(|&p| p >= first.len() || std::mem::replace(&mut seen[p], true)) {
                return Err(Error::Shape(format!("invalid permutation {perm:?} for {first:?}")));
            }
            Ok(perm.iter().map(|&p| first[p]).collect())
        }
        Op::Concat { axis } => {
            let rank = first.len();
            if *axis >= rank {
                return Err(Error::Shape(format!("concat axis {axis} out of range for {first:?}")));
            }
            let mut out = first.to_vec();
            for s in &inputs[1..] {
                if s.len() != rank || (0..rank).any(|d| d != *axis && s[d] != first[d]) {
                    return Err(Error::Shape(format!("cannot concat {first:?} with {s:?} on axis {axis}")));
                }
                out[*axis] += s[*axis];
            }
            Ok(out)
        }
        Op::Constant { value, shape } => {
            if value.len() != numel(shape) {
                return Err(Error::Shape(format!("constant of {} values for shape {shape:?}", value.len())));
            }
            Ok(shape.clone())
        }
    }
}

fn conv_output_shape(c: &Conv2d, input: &[usize]) -> Result<Vec<usize>> {
    let [oc, ic, kh, kw] = c.weight_shape;
    if input.len() != 3 || input[0] != ic {
        return Err(Error::Shape(format!("conv2d expects [{ic}, H, W], got {input:?}")));
    }
    if c.weight.len() != oc * ic * kh * kw || (!c.bias.is_empty() && c.bias.len() != oc) {
        return Err(Error::Shape("conv2d weight or bias size mismatch".into()));
    }
    if c.stride.contains(&0) || c.dilation.contains(&0) || kh == 0 || kw == 0 {
        return Err(Error::Shape("conv2d stride, dilation and kernel must be positive".into()));
    }
    let span = |n: usize, pa: usize, pb: usize, k: usize, d: usize, s: usize| -> Result<usize> {
        let padded = n + pa + pb;
        let ext = d * (k - 1) + 1;
        if ext > padded {
            return Err(Error::Shape(format!("conv2d kernel larger than padded input {input:?}")));
        }
        Ok((padded - ext) / s + 1)
    };
    let h = span(input[1], c.padding[0], c.padding[2], kh, c.dilation[0], c.stride[0])?;
    let w = span(input[2], c.padding[1], c.padding[3], kw, c.dilation[1], c.stride[1])?;
    Ok(vec![oc, h, w])
}

impl Conv2d {
    /// Dense matrix and bias equivalent to the convolution on `input` shape.
    pub fn to_dense(&self, input: &[usize]) -> Result<(Array2<f64>, Vec<f64>)> {
        let out = conv_output_shape(self, input)?;
        let [oc, ic, kh, kw] = self.weight_shape;
        let (h, w) = (input[1], input[2]);
        let (oh, ow) = (out[1], out[2]);
        let mut m = Array2::zeros((oc * oh * ow, ic * h * w));
        let mut bias = Vec::with_capacity(oc * oh * ow);
        for o in 0..oc {
            for y in 0..oh {
                for x in 0..ow {
                    let row = (o * oh + y) * ow + x;
                    bias.push(self.bias.get(o).copied().unwrap_or(0.0));
                    for c in 0..ic {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * self.stride[0] + ky * self.dilation[0]) as isize - self.padding[0] as isize;
                                let ix = (x * self.stride[1] + kx * self.dilation[1]) as isize - self.padding[1] as isize;
                                if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                                    continue;
                                }
                                let col = (c * h + iy as usize) * w + ix as usize;
                                m[[row, col]] += self.weight[((o * ic + c) * kh + ky) * kw + kx];
                            }
                        }
                    }
                }
            }
        }
        Ok((m, bias))
    }
}

/// For each output position of a transpose, the flat input index.
pub fn transpose_indices(shape: &[usize], perm: &[usize]) -> Vec<usize> {
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for d in (0..rank.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let total = numel(shape);
    let mut idx = Vec::with_capacity(total);
    let mut counter = vec![0usize; rank];
    for _ in 0..total {
        idx.push((0..rank).map(|d| counter[d] * strides[perm[d]]).sum());
        for d in (0..rank).rev() {
            counter[d] += 1;
            if counter[d] < out_shape[d] {
                break;
            }
            counter[d] = 0;
        }
    }
    idx
}

/// For each output position of a concat, `(part, flat index in part)`.
pub fn concat_indices(shapes: &[&[usize]], axis: usize) -> Vec<(usize, usize)> {
    let outer: usize = shapes[0][..axis].iter().product();
    let inner: usize = shapes[0][axis + 1..].iter().product();
    let mut idx = Vec::new();
    for o in 0..outer {
        for (p, s) in shapes.iter().enumerate() {
            let block = s[axis] * inner;
            for k in 0..block {
                idx.push((p, o * block + k));
            }
        }
    }
    idx
}

/// Flat indices of each pooling window, window-major.
pub fn pool_windows(input: &[usize], kernel: [usize; 2], stride: [usize; 2]) -> Vec<Vec<usize>> {
    let (c, h, w) = (input[0], input[1], input[2]);
    let oh = (h - kernel[0]) / stride[0] + 1;
    let ow = (w - kernel[1]) / stride[1] + 1;
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut win = Vec::with_capacity(kernel[0] * kernel[1]);
                for ky in 0..kernel[0] {
                    for kx in 0..kernel[1] {
                        win.push((ch * h + y * stride[0] + ky) * w + x * stride[1] + kx);
                    }
                }
                out.push(win);
            }
        }
    }
    out
}

impl NetworkGraph {
    /// A chain of ops applied one after another.
    pub fn sequential(input_shape: Vec<usize>, ops: Vec<Op>) -> Result<Self> {
        let mut b = GraphBuilder::new("input", input_shape);
        for (i, op) in ops.into_iter().enumerate() {
            let name = format!("{}_{i}", op.kind());
            b.then(name, op)?;
        }
        let out = b.last();
        b.finish(out)
    }

    pub fn shape_of(&self, v: ValueRef) -> &[usize] {
        match v {
            ValueRef::Input => &self.input_shape,
            ValueRef::Node(i) => &self.nodes[i].shape,
        }
    }

    pub fn input_len(&self) -> usize {
        numel(&self.input_shape)
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shape_of(self.output)
    }

    pub fn output_len(&self) -> usize {
        numel(self.output_shape())
    }

    /// Check ordering and shapes of every node.
    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            for v in &n.inputs {
                if let ValueRef::Node(j) = v {
                    if *j >= i {
                        return Err(Error::Graph(format!("node {} is not topologically ordered", n.name)));
                    }
                }
            }
            let shapes: Vec<&[usize]> = n.inputs.iter().map(|v| self.shape_of(*v)).collect();
            let shape = output_shape(&n.op, &shapes).map_err(|e| Error::Graph(format!("node {}: {e}", n.name)))?;
            if shape != n.shape {
                return Err(Error::Graph(format!("node {} declares shape {:?}, computed {shape:?}", n.name, n.shape)));
            }
        }
        if let ValueRef::Node(j) = self.output {
            if j >= self.nodes.len() {
                return Err(Error::Graph("output refers to a missing node".into()));
            }
        }
        Ok(())
    }

    /// Number of consumers of each node.
    pub fn fan_out(&self) -> Vec<usize> {
        let mut out = vec![0; self.nodes.len()];
        for n in &self.nodes {
            for v in &n.inputs {
                if let ValueRef::Node(j) = v {
                    out[*j] += 1;
                }
            }
        }
        if let ValueRef::Node(j) = self.output {
            out[j] += 1;
        }
        out
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Keep only nodes the output depends on, renumbering references.
    pub fn prune(&self) -> NetworkGraph {
        let mut live = vec![false; self.nodes.len()];
        if let ValueRef::Node(j) = self.output {
            live[j] = true;
        }
        for i in (0..self.nodes.len()).rev() {
            if live[i] {
                for v in &self.nodes[i].inputs {
                    if let ValueRef::Node(j) = v {
                        live[*j] = true;
                    }
                }
            }
        }
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        let remap = |v: &ValueRef, map: &[usize]| match v {
            ValueRef::Input => ValueRef::Input,
            ValueRef::Node(j) => ValueRef::Node(map[*j]),
        };
        for (i, n) in self.nodes.iter().enumerate() {
            if live[i] {
                map[i] = nodes.len();
                nodes.push(Node { inputs: n.inputs.iter().map(|v| remap(v, &map)).collect(), ..n.clone() });
            }
        }
        NetworkGraph { nodes, output: remap(&self.output, &map), ..self.clone() }
    }
}
