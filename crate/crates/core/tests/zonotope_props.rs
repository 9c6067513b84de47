mod common;

use ndarray::Array2;
use nnreach::interval::iv_matmul;
use nnreach::relax::CastMode;
use nnreach::{Allocator, IntervalTensor, Rounding, Zonotope};
use proptest::prelude::*;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
enum Act {
    Relu,
    Sigmoid,
    Tanh,
    Cast(CastMode),
}

impl Act {
    fn eval(self, x: f64) -> f64 {
        match self {
            Act::Relu => x.max(0.0),
            Act::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Act::Tanh => x.tanh(),
            Act::Cast(m) => m.apply(x),
        }
    }

    fn lipschitz(self) -> f64 {
        match self {
            Act::Sigmoid => 0.25,
            _ => 1.0,
        }
    }
}

const ACTS: [Act; 6] =
    [Act::Relu, Act::Sigmoid, Act::Tanh, Act::Cast(CastMode::Floor), Act::Cast(CastMode::Ceil), Act::Cast(CastMode::Round)];

/// Random affine image of a random box: the input zonotope, the affine map
/// and the box it came from.
#[derive(Debug, Clone)]
struct Case {
    b: IntervalTensor,
    w: Array2<f64>,
    c: Vec<f64>,
}

fn case(max_in: usize, max_out: usize) -> impl Strategy<Value = Case> {
    (1..=max_in, 1..=max_out, any::<u64>()).prop_map(|(n, d, seed)| {
        let mut rng = common::rng(seed);
        let b = common::random_box(&mut rng, n);
        let w = common::random_matrix(&mut rng, d, n).mapv(|v| v * 2.0);
        let c = common::random_vec(&mut rng, d, 1.0);
        Case { b, w, c }
    })
}

fn build(case: &Case, alloc: &mut Allocator, r: Rounding) -> Zonotope {
    Zonotope::from_box(&case.b, alloc, r).unwrap().affine(&case.w, Some(&case.c), r).unwrap()
}

/// Concrete pre-activation at `x` and the magnitude bounding its float error.
fn concrete(case: &Case, x: &[f64]) -> Vec<(f64, f64)> {
    (0..case.w.nrows())
        .map(|i| {
            let terms: Vec<f64> = (0..x.len()).map(|j| case.w[[i, j]] * x[j]).collect();
            let mag = case.c[i].abs() + terms.iter().map(|t| t.abs()).sum::<f64>();
            (case.c[i] + terms.iter().sum::<f64>(), 1e-13 * (1.0 + mag))
        })
        .collect()
}

fn apply(act: Act, z: &Zonotope, bounds: &IntervalTensor, alloc: &mut Allocator, r: Rounding) -> Zonotope {
    match act {
        Act::Relu => z.relu(bounds, alloc, r),
        Act::Sigmoid => z.sigmoid(bounds, alloc, r),
        Act::Tanh => z.tanh(bounds, alloc, r),
        Act::Cast(m) => z.cast(m, bounds, alloc, r),
    }
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn abstract_ops_contain_concrete_images(case in case(5, 6), seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let r = Rounding::Sound;
        let mut alloc = Allocator::new();
        let z = build(&case, &mut alloc, r);
        let pre = z.concretize(r);
        let images: Vec<(Act, IntervalTensor)> = ACTS
            .iter()
            .map(|&a| {
                let mut al = alloc.clone();
                (a, apply(a, &z, &pre, &mut al, r).concretize(r))
            })
            .collect();
        for _ in 0..200 {
            let x = common::sample(&mut rng, &case.b);
            for (i, (v, err)) in concrete(&case, &x).into_iter().enumerate() {
                prop_assert!(pre.lower[i] - err <= v && v <= pre.upper[i] + err);
                for (act, img) in &images {
                    let y = act.eval(v);
                    let slack = err * act.lipschitz() + 1e-15;
                    let inside = img.lower[i] - slack <= y && y <= img.upper[i] + slack;
                    let near_step = matches!(act, Act::Cast(_)) && (act.eval(v - err) != act.eval(v + err));
                    prop_assert!(inside || near_step, "{:?}: {} -> {} outside [{}, {}]", act, v, y, img.lower[i], img.upper[i]);
                }
            }
        }
    }

    #[test]
    fn affine_is_exact_on_dyadic_inputs(
        n in 1usize..=6,
        d in 1usize..=6,
        w in proptest::collection::vec(-16i32..=16, 36),
        lo in proptest::collection::vec(-8i32..=8, 6),
        width in proptest::collection::vec(0i32..=8, 6),
    ) {
        let w = Array2::from_shape_fn((d, n), |(i, j)| w[i * 6 + j] as f64 / 4.0);
        let lower: Vec<f64> = lo[..n].iter().map(|&v| v as f64 / 2.0).collect();
        let upper: Vec<f64> = lower.iter().zip(&width).map(|(l, &k)| l + k as f64 / 2.0).collect();
        let b = IntervalTensor::from_bounds(lower, upper).unwrap();
        let mut alloc = Allocator::new();
        let z = Zonotope::from_box(&b, &mut alloc, Rounding::Fast).unwrap();
        let y = z.affine(&w, None, Rounding::Fast).unwrap().concretize(Rounding::Fast);
        prop_assert_eq!(&y, &iv_matmul(&w, &b, Rounding::Fast).unwrap());
        for i in 0..d {
            let values: Vec<f64> = common::corners(&b).iter().map(|c| (0..n).map(|j| w[[i, j]] * c[j]).sum()).collect();
            prop_assert_eq!(y.lower[i], values.iter().cloned().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(y.upper[i], values.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
    }

    #[test]
    fn symbol_counts(case in case(4, 8)) {
        let r = Rounding::Sound;
        let mut alloc = Allocator::new();
        let z = build(&case, &mut alloc, r);
        let bounds = z.concretize(r);
        let unstable = (0..z.dim()).filter(|&i| bounds.lower[i] < 0.0 && bounds.upper[i] > 0.0).count();
        let wide = (0..z.dim()).filter(|&i| bounds.lower[i] < bounds.upper[i]).count();
        let m = z.noise_count();
        prop_assert_eq!(z.relu(&bounds, &mut alloc, r).unwrap().noise_count() - m, unstable);
        prop_assert_eq!(z.sigmoid(&bounds, &mut alloc, r).unwrap().noise_count() - m, wide);
    }

    #[test]
    fn reduce_never_shrinks(case in case(6, 5), max in 1usize..6, seed in any::<u64>()) {
        let r = Rounding::Sound;
        let mut alloc = Allocator::new();
        let mut z = build(&case, &mut alloc, r);
        let mut rng = common::rng(seed);
        for _ in 0..rng.gen_range(1..3) {
            let bounds = z.concretize(r);
            z = z.relu(&bounds, &mut alloc, r).unwrap();
        }
        let before = z.concretize(r);
        let reduced = z.reduce(max, &|_| false, &mut alloc, r);
        prop_assert!(reduced.noise_count() <= max + z.dim());
        let after = reduced.concretize(r);
        prop_assert!(after.contains(&before), "{:?}\n{:?}", before, after);
    }
}
