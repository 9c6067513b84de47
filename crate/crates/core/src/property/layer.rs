use ndarray::Array2;

use crate::error::Result;
use crate::network::rewrite::{append_affine, append_affine_with_input};
use crate::network::NetworkGraph;

use super::{LinearAtom, NormalizedProperty};

/// Append `z = C y` (or `z = C y + D x`) with one row per atom and restate
/// each atom as `z_k <= t_k`, so the atom bounds come from the analysis of
/// the extended network instead of from output intervals.
pub fn append_property_layer(g: &NetworkGraph, p: &NormalizedProperty) -> Result<(NetworkGraph, NormalizedProperty)> {
    let atoms = p.predicate.atoms();
    if atoms.is_empty() {
        return Ok((g.clone(), p.clone()));
    }
    let n_out = g.output_len();
    let n_in = g.input_len();
    let with_input = atoms.iter().any(|a| !a.inputs.is_empty());
    let cols = if with_input { n_out + n_in } else { n_out };
    let mut c = Array2::zeros((atoms.len(), cols));
    for (k, a) in atoms.iter().enumerate() {
        for &(j, v) in &a.outputs {
            c[[k, j]] += v;
        }
        for &(i, v) in &a.inputs {
            c[[k, n_out + i]] += v;
        }
    }
    let bias = vec![0.0; atoms.len()];
    let graph = if with_input {
        append_affine_with_input(g, "property", c, bias)?
    } else {
        append_affine(g, "property", c, bias)?
    };
    let mut k = 0;
    let predicate = p.predicate.map_atoms(&mut |a| {
        let z = LinearAtom { outputs: vec![(k, 1.0)], inputs: Vec::new(), rhs: a.rhs, strict: a.strict };
        k += 1;
        z
    });
    Ok((graph, NormalizedProperty { input_box: p.input_box.clone(), predicate, goal: p.goal }))
}
