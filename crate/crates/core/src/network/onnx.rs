//! ONNX import and export for the supported operator subset.

use std::collections::HashMap;

use ndarray::Array2;
use prost::Message;

use crate::error::{Error, Result};
use crate::relax::CastMode;

use super::{Conv2d, GraphBuilder, NetworkGraph, Op, ValueRef};

/// Message definitions mirroring the fields of `onnx.proto` that are read.
pub mod proto {
    #[derive(Clone, PartialEq, prost::Message)]
    pub struct ModelProto {
        #[prost(int64, tag = "1")]
        pub ir_version: i64,
        #[prost(string, tag = "2")]
        pub producer_name: String,
        #[prost(message, optional, tag = "7")]
        pub graph: Option<GraphProto>,
        #[prost(message, repeated, tag = "8")]
        pub opset_import: Vec<OperatorSetIdProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct OperatorSetIdProto {
        #[prost(string, tag = "1")]
        pub domain: String,
        #[prost(int64, tag = "2")]
        pub version: i64,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct GraphProto {
        #[prost(message, repeated, tag = "1")]
        pub node: Vec<NodeProto>,
        #[prost(string, tag = "2")]
        pub name: String,
        #[prost(message, repeated, tag = "5")]
        pub initializer: Vec<TensorProto>,
        #[prost(message, repeated, tag = "11")]
        pub input: Vec<ValueInfoProto>,
        #[prost(message, repeated, tag = "12")]
        pub output: Vec<ValueInfoProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct NodeProto {
        #[prost(string, repeated, tag = "1")]
        pub input: Vec<String>,
        #[prost(string, repeated, tag = "2")]
        pub output: Vec<String>,
        #[prost(string, tag = "3")]
        pub name: String,
        #[prost(string, tag = "4")]
        pub op_type: String,
        #[prost(message, repeated, tag = "5")]
        pub attribute: Vec<AttributeProto>,
        #[prost(string, tag = "7")]
        pub domain: String,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct AttributeProto {
        #[prost(string, tag = "1")]
        pub name: String,
        #[prost(float, tag = "2")]
        pub f: f32,
        #[prost(int64, tag = "3")]
        pub i: i64,
        #[prost(bytes = "vec", tag = "4")]
        pub s: Vec<u8>,
        #[prost(message, optional, tag = "5")]
        pub t: Option<TensorProto>,
        #[prost(float, repeated, tag = "7")]
        pub floats: Vec<f32>,
        #[prost(int64, repeated, tag = "8")]
        pub ints: Vec<i64>,
        #[prost(int32, tag = "20")]
        pub r#type: i32,
    }

    pub mod attribute_type {
        pub const FLOAT: i32 = 1;
        pub const INT: i32 = 2;
        pub const STRING: i32 = 3;
        pub const TENSOR: i32 = 4;
        pub const FLOATS: i32 = 6;
        pub const INTS: i32 = 7;
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TensorProto {
        #[prost(int64, repeated, tag = "1")]
        pub dims: Vec<i64>,
        #[prost(int32, tag = "2")]
        pub data_type: i32,
        #[prost(float, repeated, tag = "4")]
        pub float_data: Vec<f32>,
        #[prost(int32, repeated, tag = "5")]
        pub int32_data: Vec<i32>,
        #[prost(int64, repeated, tag = "7")]
        pub int64_data: Vec<i64>,
        #[prost(string, tag = "8")]
        pub name: String,
        #[prost(bytes = "vec", tag = "9")]
        pub raw_data: Vec<u8>,
        #[prost(double, repeated, tag = "10")]
        pub double_data: Vec<f64>,
        #[prost(int32, tag = "14")]
        pub data_location: i32,
    }

    pub mod data_type {
        pub const FLOAT: i32 = 1;
        pub const INT32: i32 = 6;
        pub const INT64: i32 = 7;
        pub const DOUBLE: i32 = 11;
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct ValueInfoProto {
        #[prost(string, tag = "1")]
        pub name: String,
        #[prost(message, optional, tag = "2")]
        pub r#type: Option<TypeProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TypeProto {
        #[prost(message, optional, tag = "1")]
        pub tensor_type: Option<TensorTypeProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TensorTypeProto {
        #[prost(int32, tag = "1")]
        pub elem_type: i32,
        #[prost(message, optional, tag = "2")]
        pub shape: Option<TensorShapeProto>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct TensorShapeProto {
        #[prost(message, repeated, tag = "1")]
        pub dim: Vec<Dimension>,
    }

    #[derive(Clone, PartialEq, prost::Message)]
    pub struct Dimension {
        #[prost(int64, optional, tag = "1")]
        pub dim_value: Option<i64>,
        #[prost(string, optional, tag = "2")]
        pub dim_param: Option<String>,
    }
}

use proto::*;

#[derive(Debug, Clone)]
struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    fn from_proto(t: &TensorProto) -> Result<Self> {
        if t.data_location != 0 {
            return Err(Error::Unsupported(format!("external tensor data for {:?}", t.name)));
        }
        let dims = t
            .dims
            .iter()
            .map(|&d| usize::try_from(d).map_err(|_| Error::parse("onnx", 0, 0, format!("negative dimension in {:?}", t.name))))
            .collect::<Result<Vec<_>>>()?;
        let raw = &t.raw_data;
        let data: Vec<f64> = match t.data_type {
            data_type::FLOAT if !raw.is_empty() => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
            data_type::FLOAT => t.float_data.iter().map(|&v| v as f64).collect(),
            data_type::DOUBLE if !raw.is_empty() => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
            data_type::DOUBLE => t.double_data.clone(),
            data_type::INT64 if !raw.is_empty() => raw.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
            data_type::INT64 => t.int64_data.iter().map(|&v| v as f64).collect(),
            data_type::INT32 if !raw.is_empty() => raw.chunks_exact(4).map(|c| i32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
            data_type::INT32 => t.int32_data.iter().map(|&v| v as f64).collect(),
            other => return Err(Error::Unsupported(format!("tensor element type {other} in {:?}", t.name))),
        };
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::parse("onnx", 0, 0, format!("tensor {:?} has {} values for dims {dims:?}", t.name, data.len())));
        }
        Ok(Self { dims, data })
    }

    fn matrix(&self) -> Result<Array2<f64>> {
        if self.dims.len() != 2 {
            return Err(Error::Unsupported(format!("expected a 2-D weight, got dims {:?}", self.dims)));
        }
        Ok(Array2::from_shape_vec((self.dims[0], self.dims[1]), self.data.clone()).expect("size checked"))
    }
}

struct Attrs<'a>(&'a [AttributeProto]);

impl Attrs<'_> {
    fn get(&self, name: &str) -> Option<&AttributeProto> {
        self.0.iter().find(|a| a.name == name)
    }
    fn int(&self, name: &str, default: i64) -> i64 {
        self.get(name).map_or(default, |a| a.i)
    }
    fn float(&self, name: &str, default: f32) -> f32 {
        self.get(name).map_or(default, |a| a.f)
    }
    fn ints(&self, name: &str) -> Option<Vec<i64>> {
        self.get(name).map(|a| a.ints.clone())
    }
}

fn pair(v: Option<Vec<i64>>, default: usize) -> Result<[usize; 2]> {
    match v.as_deref() {
        None => Ok([default; 2]),
        Some([a, b]) if *a >= 0 && *b >= 0 => Ok([*a as usize, *b as usize]),
        Some(other) => Err(Error::Unsupported(format!("2-D attribute expected, got {other:?}"))),
    }
}

/// Parse a serialized `ModelProto`.
pub fn parse(bytes: &[u8]) -> Result<NetworkGraph> {
    let model = ModelProto::decode(bytes).map_err(|e| Error::parse("onnx", 0, 0, e.to_string()))?;
    let graph = model.graph.ok_or_else(|| Error::parse("onnx", 0, 0, "model has no graph"))?;
    Importer::new(&graph)?.run(&graph)
}

enum Value {
    Node(ValueRef),
    Const(Tensor),
}

struct Importer {
    values: HashMap<String, Value>,
    builder: GraphBuilder,
}

impl Importer {
    fn new(graph: &GraphProto) -> Result<Self> {
        let mut values = HashMap::new();
        for t in &graph.initializer {
            values.insert(t.name.clone(), Value::Const(Tensor::from_proto(t)?));
        }
        let inputs: Vec<&ValueInfoProto> = graph.input.iter().filter(|i| !values.contains_key(&i.name)).collect();
        let [input] = inputs.as_slice() else {
            return Err(Error::Unsupported(format!("{} graph inputs; exactly one is required", inputs.len())));
        };
        let dims = input
            .r#type
            .as_ref()
            .and_then(|t| t.tensor_type.as_ref())
            .and_then(|t| t.shape.as_ref())
            .ok_or_else(|| Error::Unsupported("input without a static shape".into()))?;
        let mut shape = Vec::new();
        for (k, d) in dims.dim.iter().enumerate() {
            match (d.dim_value, &d.dim_param) {
                (Some(v), _) if v > 0 => shape.push(v as usize),
                (_, Some(p)) if k == 0 && !p.is_empty() => shape.push(1),
                (_, Some(p)) => return Err(Error::Unsupported(format!("dynamic dimension {p:?}"))),
                _ => return Err(Error::Unsupported("dynamic dimension".into())),
            }
        }
        if shape.len() > 1 && shape[0] == 1 {
            shape.remove(0);
        }
        let builder = GraphBuilder::new(input.name.clone(), shape);
        values.insert(input.name.clone(), Value::Node(ValueRef::Input));
        Ok(Self { values, builder })
    }

    fn run(mut self, graph: &GraphProto) -> Result<NetworkGraph> {
        for (k, node) in graph.node.iter().enumerate() {
            if !(node.domain.is_empty() || node.domain == "ai.onnx") {
                return Err(Error::Unsupported(format!("{}::{}", node.domain, node.op_type)));
            }
            let name = if node.name.is_empty() { format!("{}_{k}", node.op_type) } else { node.name.clone() };
            let out = self.import(node, &name)?;
            let target = node.output.first().ok_or_else(|| Error::parse("onnx", 0, 0, format!("node {name} has no output")))?;
            self.values.insert(target.clone(), out);
        }
        let out_name = &graph.output.first().ok_or_else(|| Error::parse("onnx", 0, 0, "graph has no output"))?.name;
        match self.values.get(out_name) {
            Some(Value::Node(v)) => {
                let v = *v;
                self.builder.finish(v)
            }
            _ => Err(Error::Graph(format!("output {out_name:?} is not computed from the input"))),
        }
    }

    fn node_input(&self, node: &NodeProto, k: usize) -> Result<ValueRef> {
        match node.input.get(k).and_then(|n| self.values.get(n)) {
            Some(Value::Node(v)) => Ok(*v),
            Some(Value::Const(_)) => Err(Error::Unsupported(format!("{} with a constant data input", node.op_type))),
            None => Err(Error::Graph(format!("{} reads an unknown value", node.op_type))),
        }
    }

    fn constant(&self, node: &NodeProto, k: usize) -> Option<&Tensor> {
        match node.input.get(k).and_then(|n| self.values.get(n)) {
            Some(Value::Const(t)) => Some(t),
            _ => None,
        }
    }

    fn push(&mut self, name: &str, op: Op, inputs: &[ValueRef]) -> Result<Value> {
        Ok(Value::Node(self.builder.push(name, op, inputs)?))
    }

    /// Strip the batch axis from an axis index or a shape given with one.
    fn axis(&self, v: ValueRef, axis: i64) -> Result<usize> {
        let rank = self.builder.shape_of(v).len() as i64 + 1;
        let a = if axis < 0 { axis + rank } else { axis };
        if a < 1 || a >= rank {
            return Err(Error::Unsupported(format!("axis {axis} touches the batch dimension")));
        }
        Ok((a - 1) as usize)
    }

    fn import(&mut self, node: &NodeProto, name: &str) -> Result<Value> {
        let attrs = Attrs(&node.attribute);
        let op = node.op_type.as_str();
        match op {
            "Constant" => {
                let t = attrs.get("value").and_then(|a| a.t.as_ref()).ok_or_else(|| Error::Unsupported("Constant without a tensor value".into()))?;
                Ok(Value::Const(Tensor::from_proto(t)?))
            }
            "Identity" | "Dropout" => Ok(Value::Node(self.node_input(node, 0)?)),
            "Relu" => self.unary(node, name, Op::Relu),
            "Sigmoid" => self.unary(node, name, Op::Sigmoid),
            "Tanh" => self.unary(node, name, Op::Tanh),
            "Floor" => self.unary(node, name, Op::Cast { mode: CastMode::Floor }),
            "Ceil" => self.unary(node, name, Op::Cast { mode: CastMode::Ceil }),
            "Round" => self.unary(node, name, Op::Cast { mode: CastMode::Round }),
            "Softmax" => {
                let x = self.node_input(node, 0)?;
                let rank = self.builder.shape_of(x).len();
                if self.axis(x, attrs.int("axis", -1))? + 1 != rank {
                    return Err(Error::Unsupported("Softmax over a non-final axis".into()));
                }
                self.push(name, Op::Softmax, &[x])
            }
            "Flatten" => {
                let x = self.node_input(node, 0)?;
                if attrs.int("axis", 1) != 1 {
                    return Err(Error::Unsupported("Flatten with axis other than 1".into()));
                }
                self.push(name, Op::Flatten, &[x])
            }
            "Reshape" => {
                let x = self.node_input(node, 0)?;
                let target = self.constant(node, 1).ok_or_else(|| Error::Unsupported("Reshape with a computed shape".into()))?;
                let shape = self.reshape_target(x, &target.data)?;
                self.push(name, Op::Reshape { shape }, &[x])
            }
            "Transpose" => {
                let x = self.node_input(node, 0)?;
                let rank = self.builder.shape_of(x).len();
                let perm = attrs.ints("perm").unwrap_or_else(|| (0..=rank as i64).rev().collect());
                if perm.first() != Some(&0) {
                    return Err(Error::Unsupported("Transpose moving the batch dimension".into()));
                }
                let perm = perm[1..].iter().map(|&p| p as usize - 1).collect();
                self.push(name, Op::Transpose { perm }, &[x])
            }
            "Concat" => {
                let xs = (0..node.input.len()).map(|k| self.node_input(node, k)).collect::<Result<Vec<_>>>()?;
                let axis = self.axis(xs[0], attrs.int("axis", 1))?;
                self.push(name, Op::Concat { axis }, &xs)
            }
            "Gemm" => self.gemm(node, name, &attrs),
            "MatMul" => {
                if let Some(b) = self.constant(node, 1) {
                    let weight = b.matrix()?.reversed_axes().as_standard_layout().to_owned();
                    let x = self.node_input(node, 0)?;
                    self.push(name, Op::MatMul { weight }, &[x])
                } else if let Some(a) = self.constant(node, 0) {
                    let weight = a.matrix()?;
                    let x = self.node_input(node, 1)?;
                    self.push(name, Op::MatMul { weight }, &[x])
                } else {
                    Err(Error::Unsupported("MatMul of two computed tensors".into()))
                }
            }
            "Add" | "Sub" => self.add_sub(node, name, op == "Sub"),
            "Mul" | "Div" => {
                let x = self.node_input(node, 0)?;
                let c = self.constant(node, 1).ok_or_else(|| Error::Unsupported(format!("{op} of two computed tensors")))?.clone();
                let shape = self.builder.shape_of(x).to_vec();
                let n: usize = shape.iter().product();
                let cshape = strip_batch(&c.dims, shape.len());
                let idx = crate::interval::broadcast_index(&shape, &cshape);
                if idx.len() != n {
                    return Err(Error::Shape(format!("{op} constant {:?} does not broadcast to {shape:?}", c.dims)));
                }
                let mut w = Array2::zeros((n, n));
                for (i, j) in idx.into_iter().enumerate() {
                    w[[i, i]] = if op == "Mul" { c.data[j] } else { 1.0 / c.data[j] };
                }
                let scaled = self.builder.push(format!("{name}_scale"), Op::MatMul { weight: w }, &[x])?;
                self.push(name, Op::Reshape { shape }, &[scaled])
            }
            "Conv" => self.conv(node, name, &attrs),
            "MaxPool" => {
                let x = self.node_input(node, 0)?;
                let kernel = pair(attrs.ints("kernel_shape"), 1)?;
                let stride = pair(attrs.ints("strides"), 1)?;
                if attrs.ints("pads").is_some_and(|p| p.iter().any(|&v| v != 0)) || attrs.int("ceil_mode", 0) != 0 {
                    return Err(Error::Unsupported("padded MaxPool".into()));
                }
                if attrs.ints("dilations").is_some_and(|d| d.iter().any(|&v| v != 1)) {
                    return Err(Error::Unsupported("dilated MaxPool".into()));
                }
                self.push(name, Op::MaxPool { kernel, stride }, &[x])
            }
            other => Err(Error::Unsupported(other.to_string())),
        }
    }

    fn unary(&mut self, node: &NodeProto, name: &str, op: Op) -> Result<Value> {
        let x = self.node_input(node, 0)?;
        self.push(name, op, &[x])
    }

    fn reshape_target(&self, x: ValueRef, raw: &[f64]) -> Result<Vec<usize>> {
        let src = self.builder.shape_of(x);
        let total: usize = src.iter().product();
        let mut dims: Vec<i64> = raw.iter().map(|&v| v as i64).collect();
        if dims.len() > 1 && (dims[0] == 1 || dims[0] == -1 || dims[0] == 0) {
            dims.remove(0);
        } else if !dims.is_empty() {
            return Err(Error::Unsupported("Reshape changing the batch dimension".into()));
        }
        let mut shape = Vec::with_capacity(dims.len());
        let mut infer = None;
        for (k, &d) in dims.iter().enumerate() {
            match d {
                -1 => {
                    infer = Some(k);
                    shape.push(1);
                }
                0 => shape.push(*src.get(k).ok_or_else(|| Error::Shape("Reshape copies a missing dimension".into()))?),
                d if d > 0 => shape.push(d as usize),
                _ => return Err(Error::Shape(format!("invalid Reshape dimension {d}"))),
            }
        }
        if let Some(k) = infer {
            let known: usize = shape.iter().product();
            if known == 0 || total % known != 0 {
                return Err(Error::Shape(format!("cannot infer Reshape of {src:?} to {dims:?}")));
            }
            shape[k] = total / known;
        }
        Ok(shape)
    }

    fn gemm(&mut self, node: &NodeProto, name: &str, attrs: &Attrs) -> Result<Value> {
        if attrs.int("transA", 0) != 0 {
            return Err(Error::Unsupported("Gemm with transA".into()));
        }
        let x = self.node_input(node, 0)?;
        let b = self.constant(node, 1).ok_or_else(|| Error::Unsupported("Gemm with a computed weight".into()))?;
        let mut w = b.matrix()?;
        if attrs.int("transB", 0) == 0 {
            w = w.reversed_axes().as_standard_layout().to_owned();
        }
        let alpha = attrs.float("alpha", 1.0) as f64;
        let beta = attrs.float("beta", 1.0) as f64;
        if alpha != 1.0 {
            w.mapv_inplace(|v| v * alpha);
        }
        let rows = w.nrows();
        let bias = match self.constant(node, 2) {
            None => vec![0.0; rows],
            Some(c) if c.data.len() == rows => c.data.iter().map(|v| v * beta).collect(),
            Some(c) if c.data.len() == 1 => vec![c.data[0] * beta; rows],
            Some(c) => return Err(Error::Shape(format!("Gemm bias dims {:?} for {rows} outputs", c.dims))),
        };
        self.push(name, Op::Affine { weight: w, bias }, &[x])
    }

    fn add_sub(&mut self, node: &NodeProto, name: &str, sub: bool) -> Result<Value> {
        let c0 = self.constant(node, 0).cloned();
        let c1 = self.constant(node, 1).cloned();
        match (c0, c1) {
            (None, Some(c)) => {
                let x = self.node_input(node, 0)?;
                let rank = self.builder.shape_of(x).len();
                let bias = if sub { c.data.iter().map(|v| -v).collect() } else { c.data };
                self.push(name, Op::BiasAdd { bias, shape: strip_batch(&c.dims, rank) }, &[x])
            }
            (Some(c), None) => {
                let x = self.node_input(node, 1)?;
                let rank = self.builder.shape_of(x).len();
                let shape = strip_batch(&c.dims, rank);
                let mut y = x;
                if sub {
                    let n: usize = self.builder.shape_of(x).iter().product();
                    let s = self.builder.shape_of(x).to_vec();
                    let neg = self.builder.push(format!("{name}_neg"), Op::MatMul { weight: -Array2::eye(n) }, &[x])?;
                    y = self.builder.push(format!("{name}_shape"), Op::Reshape { shape: s }, &[neg])?;
                }
                self.push(name, Op::BiasAdd { bias: c.data, shape }, &[y])
            }
            (None, None) => {
                let a = self.node_input(node, 0)?;
                let mut b = self.node_input(node, 1)?;
                if sub {
                    let s = self.builder.shape_of(b).to_vec();
                    let n: usize = s.iter().product();
                    let neg = self.builder.push(format!("{name}_neg"), Op::MatMul { weight: -Array2::eye(n) }, &[b])?;
                    b = self.builder.push(format!("{name}_shape"), Op::Reshape { shape: s }, &[neg])?;
                }
                self.push(name, Op::Add, &[a, b])
            }
            (Some(_), Some(_)) => Err(Error::Unsupported(format!("{} of two constants", node.op_type))),
        }
    }

    fn conv(&mut self, node: &NodeProto, name: &str, attrs: &Attrs) -> Result<Value> {
        let x = self.node_input(node, 0)?;
        let w = self.constant(node, 1).ok_or_else(|| Error::Unsupported("Conv with a computed kernel".into()))?;
        if w.dims.len() != 4 {
            return Err(Error::Unsupported(format!("Conv kernel with dims {:?}", w.dims)));
        }
        if attrs.int("group", 1) != 1 {
            return Err(Error::Unsupported("grouped Conv".into()));
        }
        if attrs.get("auto_pad").is_some_and(|a| !a.s.is_empty() && a.s != b"NOTSET") {
            return Err(Error::Unsupported("Conv auto_pad".into()));
        }
        let pads = match attrs.ints("pads").as_deref() {
            None => [0; 4],
            // ONNX order: [top, left, bottom, right].
            Some([t, l, b, r]) if [*t, *l, *b, *r].iter().all(|v| *v >= 0) => [*t as usize, *l as usize, *b as usize, *r as usize],
            Some(p) => return Err(Error::Unsupported(format!("Conv pads {p:?}"))),
        };
        let conv = Conv2d {
            weight: w.data.clone(),
            weight_shape: [w.dims[0], w.dims[1], w.dims[2], w.dims[3]],
            bias: self.constant(node, 2).map(|b| b.data.clone()).unwrap_or_default(),
            stride: pair(attrs.ints("strides"), 1)?,
            padding: pads,
            dilation: pair(attrs.ints("dilations"), 1)?,
        };
        self.push(name, Op::Conv2d(conv), &[x])
    }
}

/// Drop a leading batch axis from a constant's dims when it has one more
/// axis than the data it combines with.
fn strip_batch(dims: &[usize], rank: usize) -> Vec<usize> {
    if dims.len() > rank && dims[0] == 1 {
        dims[1..].to_vec()
    } else {
        dims.to_vec()
    }
}

fn tensor(name: &str, dims: &[usize], data: &[f64]) -> TensorProto {
    TensorProto {
        dims: dims.iter().map(|&d| d as i64).collect(),
        data_type: data_type::DOUBLE,
        name: name.to_string(),
        double_data: data.to_vec(),
        ..Default::default()
    }
}

fn ints_attr(name: &str, v: &[usize]) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        ints: v.iter().map(|&x| x as i64).collect(),
        r#type: attribute_type::INTS,
        ..Default::default()
    }
}

fn int_attr(name: &str, v: i64) -> AttributeProto {
    AttributeProto { name: name.into(), i: v, r#type: attribute_type::INT, ..Default::default() }
}

fn value_info(name: &str, shape: &[usize]) -> ValueInfoProto {
    let mut dim = vec![Dimension { dim_value: Some(1), dim_param: None }];
    dim.extend(shape.iter().map(|&d| Dimension { dim_value: Some(d as i64), dim_param: None }));
    ValueInfoProto {
        name: name.into(),
        r#type: Some(TypeProto {
            tensor_type: Some(TensorTypeProto { elem_type: data_type::DOUBLE, shape: Some(TensorShapeProto { dim }) }),
        }),
    }
}

/// Serialize a graph as an ONNX model with a leading batch axis of 1.
pub fn write(graph: &NetworkGraph) -> Result<Vec<u8>> {
    let value = |v: &ValueRef| match v {
        ValueRef::Input => graph.input_name.clone(),
        ValueRef::Node(i) => graph.nodes[*i].name.clone(),
    };
    let mut nodes = Vec::new();
    let mut inits = Vec::new();
    for n in &graph.nodes {
        let mut inputs: Vec<String> = n.inputs.iter().map(value).collect();
        let mut attribute = Vec::new();
        let op_type = match &n.op {
            Op::Affine { weight, bias } => {
                inits.push(tensor(&format!("{}_W", n.name), &[weight.nrows(), weight.ncols()], weight.as_standard_layout().as_slice().unwrap()));
                inits.push(tensor(&format!("{}_b", n.name), &[bias.len()], bias));
                inputs.push(format!("{}_W", n.name));
                inputs.push(format!("{}_b", n.name));
                attribute.push(int_attr("transB", 1));
                "Gemm"
            }
            Op::MatMul { weight } => {
                let wt = weight.t().as_standard_layout().to_owned();
                inits.push(tensor(&format!("{}_W", n.name), &[wt.nrows(), wt.ncols()], wt.as_slice().unwrap()));
                inputs.push(format!("{}_W", n.name));
                "MatMul"
            }
            Op::BiasAdd { bias, shape } => {
                inits.push(tensor(&format!("{}_b", n.name), shape, bias));
                inputs.push(format!("{}_b", n.name));
                "Add"
            }
            Op::Conv2d(c) => {
                inits.push(tensor(&format!("{}_W", n.name), &c.weight_shape, &c.weight));
                inputs.push(format!("{}_W", n.name));
                if !c.bias.is_empty() {
                    inits.push(tensor(&format!("{}_b", n.name), &[c.bias.len()], &c.bias));
                    inputs.push(format!("{}_b", n.name));
                }
                attribute.push(ints_attr("strides", &c.stride));
                attribute.push(ints_attr("pads", &c.padding));
                attribute.push(ints_attr("dilations", &c.dilation));
                "Conv"
            }
            Op::Relu => "Relu",
            Op::Sigmoid => "Sigmoid",
            Op::Tanh => "Tanh",
            Op::Cast { mode: CastMode::Floor } => "Floor",
            Op::Cast { mode: CastMode::Ceil } => "Ceil",
            Op::Cast { mode: CastMode::Round } => "Round",
            Op::Softmax => {
                attribute.push(int_attr("axis", -1));
                "Softmax"
            }
            Op::MaxPool { kernel, stride } => {
                attribute.push(ints_attr("kernel_shape", kernel));
                attribute.push(ints_attr("strides", stride));
                "MaxPool"
            }
            Op::Add => "Add",
            Op::Flatten => "Flatten",
            Op::Reshape { shape } => {
                let mut s = vec![1.0];
                s.extend(shape.iter().map(|&d| d as f64));
                let mut t = tensor(&format!("{}_shape", n.name), &[s.len()], &[]);
                t.data_type = data_type::INT64;
                t.double_data.clear();
                t.int64_data = s.iter().map(|&v| v as i64).collect();
                inits.push(t);
                inputs.push(format!("{}_shape", n.name));
                "Reshape"
            }
            Op::Transpose { perm } => {
                let mut p = vec![0];
                p.extend(perm.iter().map(|&d| d + 1));
                attribute.push(ints_attr("perm", &p));
                "Transpose"
            }
            Op::Concat { axis } => {
                attribute.push(int_attr("axis", *axis as i64 + 1));
                "Concat"
            }
            Op::Constant { value, shape } => {
                attribute.push(AttributeProto {
                    name: "value".into(),
                    t: Some(tensor(&n.name, shape, value)),
                    r#type: attribute_type::TENSOR,
                    ..Default::default()
                });
                "Constant"
            }
        };
        nodes.push(NodeProto {
            input: inputs,
            output: vec![n.name.clone()],
            name: n.name.clone(),
            op_type: op_type.into(),
            attribute,
            domain: String::new(),
        });
    }
    let model = ModelProto {
        ir_version: 8,
        producer_name: "nnreach".into(),
        graph: Some(GraphProto {
            node: nodes,
            name: "graph".into(),
            initializer: inits,
            input: vec![value_info(&graph.input_name, &graph.input_shape)],
            output: vec![value_info(&value(&graph.output), graph.output_shape())],
        }),
        opset_import: vec![OperatorSetIdProto { domain: String::new(), version: 13 }],
    };
    Ok(model.encode_to_vec())
}
