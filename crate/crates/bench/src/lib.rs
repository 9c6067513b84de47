//! Fixtures shared by the benchmarks in `benches/`.

use ndarray::Array2;
use nnreach::network::{GraphBuilder, Op};
use nnreach::{IntervalTensor, NetworkGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform entries in `[-1, 1]` scaled by `1/sqrt(cols)`.
pub fn matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    let s = 1.0 / (cols as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..s))
}

pub fn vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn unit_box(n: usize, radius: f64) -> IntervalTensor {
    IntervalTensor::from_bounds(vec![-radius; n], vec![radius; n]).unwrap()
}

/// Fully connected ReLU network with the given layer widths.
pub fn mlp(seed: u64, widths: &[usize]) -> NetworkGraph {
    let mut rng = rng(seed);
    let mut g = GraphBuilder::new("x", vec![widths[0]]);
    let mut last = None;
    for (i, w) in widths.windows(2).enumerate() {
        last = Some(g.then(format!("fc{i}"), Op::Affine { weight: matrix(&mut rng, w[1], w[0]), bias: vector(&mut rng, w[1], 0.1) }).unwrap());
        if i + 2 < widths.len() {
            last = Some(g.then(format!("relu{i}"), Op::Relu).unwrap());
        }
    }
    g.finish(last.unwrap()).unwrap()
}
