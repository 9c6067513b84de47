//! Concrete counterexample search: random samples, box corners, then a
//! sign-gradient descent on the property margin.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Counterexample, Problem};
use crate::error::{Error, Result};
use crate::interval::IntervalTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub enabled: bool,
    /// Uniform samples drawn from the box.
    pub samples: usize,
    /// Largest number of corners tried.
    pub corners: usize,
    pub steps: usize,
    pub restarts: usize,
    /// Initial step as a fraction of each input width.
    pub step_frac: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self { enabled: true, samples: 100, corners: 64, steps: 20, restarts: 4, step_frac: 0.1 }
    }
}

/// Above this many inputs the gradient is estimated from random
/// simultaneous perturbations instead of one difference per coordinate.
const COORDINATE_LIMIT: usize = 64;

struct Search<'a> {
    problem: &'a Problem,
    deadline: Option<Instant>,
}

impl Search<'_> {
    fn tick(&self) -> Result<()> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(Error::Timeout),
            _ => Ok(()),
        }
    }

    /// Margin of the property at `x`; NaN when inference fails.
    fn margin(&self, x: &[f64]) -> f64 {
        match self.problem.network.infer(x) {
            Ok(y) => self.problem.property.predicate.margin(x, &y),
            Err(_) => f64::NAN,
        }
    }
}

fn sample(b: &IntervalTensor, rng: &mut ChaCha8Rng) -> Vec<f64> {
    b.lower.iter().zip(&b.upper).map(|(&l, &u)| if u > l { rng.gen_range(l..=u) } else { l }).collect()
}

fn corner(b: &IntervalTensor, bits: impl Fn(usize) -> bool) -> Vec<f64> {
    (0..b.len()).map(|i| if bits(i) { b.upper[i] } else { b.lower[i] }).collect()
}

/// Look for a concrete input in `b` violating the property. Every returned
/// point has been confirmed by inference on the original network.
pub fn search_counterexample(
    problem: &Problem,
    b: &IntervalTensor,
    cfg: &AttackConfig,
    seed: u64,
    deadline: Option<Instant>,
) -> Result<Option<Counterexample>> {
    let s = Search { problem, deadline };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.len();
    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    let consider = |x: Vec<f64>, starts: &mut Vec<(f64, Vec<f64>)>| -> Option<Counterexample> {
        let m = s.margin(&x);
        if m.is_nan() {
            return None;
        }
        if m <= 0.0 {
            if let Some(c) = problem.confirm(&x) {
                return Some(c);
            }
        }
        starts.push((m, x));
        None
    };

    if let Some(c) = consider(b.center(), &mut starts) {
        return Ok(Some(c));
    }
    for _ in 0..cfg.samples {
        s.tick()?;
        if let Some(c) = consider(sample(b, &mut rng), &mut starts) {
            return Ok(Some(c));
        }
    }
    let all = n < usize::BITS as usize && (1usize << n) <= cfg.corners;
    let corners = if all { 1usize << n } else { cfg.corners };
    for k in 0..corners {
        s.tick()?;
        let x = if all {
            corner(b, |i| k >> i & 1 == 1)
        } else {
            let bits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            corner(b, |i| bits[i])
        };
        if let Some(c) = consider(x, &mut starts) {
            return Ok(Some(c));
        }
    }

    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let widths = b.widths();
    for restart in 0..cfg.restarts {
        let mut x = match starts.get(restart) {
            Some((_, x)) if restart % 2 == 0 => x.clone(),
            _ => sample(b, &mut rng),
        };
        let mut step = cfg.step_frac;
        for _ in 0..cfg.steps {
            s.tick()?;
            let g = gradient(&s, &x, &widths, &mut rng);
            for i in 0..n {
                if g[i] != 0.0 {
                    x[i] = (x[i] - step * widths[i] * g[i].signum()).clamp(b.lower[i], b.upper[i]);
                }
            }
            let m = s.margin(&x);
            if m <= 0.0 {
                if let Some(c) = problem.confirm(&x) {
                    return Ok(Some(c));
                }
            }
            step *= 0.9;
        }
    }
    Ok(None)
}

/// Estimate of the margin gradient at `x`.
fn gradient(s: &Search, x: &[f64], widths: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let h = |i: usize| (widths[i] * 1e-4).max(1e-9);
    if n <= COORDINATE_LIMIT {
        let mut p = x.to_vec();
        for i in 0..n {
            if widths[i] <= 0.0 {
                continue;
            }
            p[i] = x[i] + h(i);
            let up = s.margin(&p);
            p[i] = x[i] - h(i);
            let down = s.margin(&p);
            p[i] = x[i];
            let d = (up - down) / (2.0 * h(i));
            g[i] = if d.is_finite() { d } else { 0.0 };
        }
    } else {
        for _ in 0..4 {
            let delta: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let plus: Vec<f64> = (0..n).map(|i| x[i] + h(i) * delta[i]).collect();
            let minus: Vec<f64> = (0..n).map(|i| x[i] - h(i) * delta[i]).collect();
            let d = s.margin(&plus) - s.margin(&minus);
            if d.is_finite() {
                for i in 0..n {
                    g[i] += d * delta[i];
                }
            }
        }
    }
    g
}
