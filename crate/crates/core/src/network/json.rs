//! Native JSON graph format.
//!
//! ```json
//! {"format": "nnreach-graph", "version": 1,
//!  "input": {"name": "x", "shape": [2]},
//!  "nodes": [{"name": "fc", "op": "affine", "inputs": ["x"],
//!             "weight": [[1.0, -1.0]], "bias": [0.0]}],
//!  "output": "fc"}
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{GraphBuilder, NetworkGraph, Op, ValueRef};

pub const FORMAT: &str = "nnreach-graph";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    input: InputDecl,
    nodes: Vec<NodeDecl>,
    output: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDecl {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDecl {
    name: String,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(flatten)]
    op: Op,
}

/// Parse a JSON graph; nodes may appear in any order.
pub fn parse(text: &str) -> Result<NetworkGraph> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        Error::parse("json", inner.line(), inner.column(), format!("at {}: {inner}", e.path()))
    })?;
    if doc.format != FORMAT {
        return Err(Error::parse("json", 0, 0, format!("format must be {FORMAT:?}, got {:?}", doc.format)));
    }
    if doc.version != VERSION {
        return Err(Error::Unsupported(format!("graph version {}", doc.version)));
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, n) in doc.nodes.iter().enumerate() {
        if n.name == doc.input.name || index.insert(&n.name, i).is_some() {
            return Err(Error::Graph(format!("duplicate name {:?}", n.name)));
        }
    }
    let deps: Vec<Vec<usize>> = doc
        .nodes
        .iter()
        .map(|n| {
            n.inputs
                .iter()
                .filter(|s| **s != doc.input.name)
                .map(|s| index.get(s.as_str()).copied().ok_or_else(|| Error::Graph(format!("node {:?} reads unknown value {s:?}", n.name))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let order = topo_order(&deps).ok_or_else(|| Error::Graph("graph contains a cycle".into()))?;

    let mut builder = GraphBuilder::new(doc.input.name.clone(), doc.input.shape.clone());
    let mut refs: HashMap<&str, ValueRef> = HashMap::new();
    refs.insert(&doc.input.name, ValueRef::Input);
    for i in order {
        let n = &doc.nodes[i];
        let inputs: Vec<ValueRef> = n.inputs.iter().map(|s| refs[s.as_str()]).collect();
        let v = builder.push(n.name.clone(), n.op.clone(), &inputs)?;
        refs.insert(&n.name, v);
    }
    let output = *refs.get(doc.output.as_str()).ok_or_else(|| Error::Graph(format!("unknown output {:?}", doc.output)))?;
    builder.finish(output)
}

fn topo_order(deps: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = deps.len();
    let mut state = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some((v, k)) = stack.pop() {
            if let Some(&d) = deps[v].get(k) {
                stack.push((v, k + 1));
                match state[d] {
                    0 => {
                        state[d] = 1;
                        stack.push((d, 0));
                    }
                    1 => return None,
                    _ => {}
                }
            } else {
                state[v] = 2;
                order.push(v);
            }
        }
    }
    Some(order)
}

/// Serialize a graph in the native format.
pub fn write(graph: &NetworkGraph) -> String {
    let name = |v: &ValueRef| match v {
        ValueRef::Input => graph.input_name.clone(),
        ValueRef::Node(i) => graph.nodes[*i].name.clone(),
    };
    let doc = Document {
        format: FORMAT.into(),
        version: VERSION,
        input: InputDecl { name: graph.input_name.clone(), shape: graph.input_shape.clone() },
        nodes: graph
            .nodes
            .iter()
            .map(|n| NodeDecl { name: n.name.clone(), inputs: n.inputs.iter().map(name).collect(), op: n.op.clone() })
            .collect(),
        output: name(&graph.output),
    };
    serde_json::to_string_pretty(&doc).expect("graph serialization cannot fail")
}
