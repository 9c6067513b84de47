//! Branch and bound over input boxes and over ReLU signs.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyse, Analysis, AnalysisConfig, DomainKind, Problem, Region, ReluInfo, Status, Verdict};
use crate::constrained::{NeuronRef, Sign};
use crate::error::{Error, Result};
use crate::interval::IntervalTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    None,
    Input,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BabConfig {
    /// Parts per input split.
    pub k: usize,
    /// Subproblems analysed concurrently.
    pub jobs: usize,
}

impl Default for BabConfig {
    fn default() -> Self {
        Self { k: 2, jobs: 1 }
    }
}

/// Counters of one branch-and-bound run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BabStats {
    pub analysed: usize,
    pub splits: usize,
    pub max_worklist: usize,
    /// Subproblems proved empty.
    pub infeasible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BabOutcome {
    pub verdict: Verdict,
    pub stats: BabStats,
}

/// A pending piece of the original problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubProblem {
    pub region: Region,
    pub depth: usize,
}

/// `argmax_i alpha_i * (u_i - l_i)`, lowest index on ties. Dimensions that
/// cannot be bisected any further are never chosen.
pub fn choose_dim(alpha: &[f64], b: &IntervalTensor) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..b.len() {
        let (l, u) = (b.lower[i], b.upper[i]);
        let mid = l + (u - l) / 2.0;
        if !(l < mid && mid < u) {
            continue;
        }
        let score = alpha.get(i).copied().unwrap_or(0.0) * (u - l);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

/// `k` equal slices of `b` along `dim`, sharing their end points.
pub fn split_box(b: &IntervalTensor, dim: usize, k: usize) -> Vec<IntervalTensor> {
    let (l, u) = (b.lower[dim], b.upper[dim]);
    let cut = |j: usize| if j == k { u } else { l + (u - l) * j as f64 / k as f64 };
    (0..k)
        .map(|j| {
            let mut c = b.clone();
            c.lower[dim] = cut(j);
            c.upper[dim] = cut(j + 1);
            c
        })
        .collect()
}

/// Area of the ReLU band over `[l, u]` cut away by fixing either sign.
pub fn relu_deltas(l: f64, u: f64) -> (f64, f64) {
    let d = l.abs() * u / (2.0 * (u - l));
    (d, d)
}

/// `argmax (delta_pos + delta_neg) * influence` over unstable neurons not
/// yet split, ties to the smallest `(node, index)`.
pub fn choose_relu(relus: &[ReluInfo], split: &BTreeMap<NeuronRef, Sign>) -> Option<NeuronRef> {
    let mut best: Option<(NeuronRef, f64)> = None;
    for r in relus.iter().filter(|r| !split.contains_key(&r.neuron) && r.lower < 0.0 && r.upper > 0.0) {
        let (dp, dn) = relu_deltas(r.lower, r.upper);
        let gamma = (dp + dn) * r.influence;
        let better = match best {
            None => true,
            Some((n, g)) => gamma > g || (gamma == g && r.neuron < n),
        };
        if better {
            best = Some((r.neuron, gamma));
        }
    }
    best.map(|(n, _)| n)
}

struct Driver<'a> {
    problem: &'a Problem,
    cfg: &'a AnalysisConfig,
    bab: BabConfig,
    deadline: Option<Instant>,
    stats: BabStats,
}

impl Driver<'_> {
    fn past(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Analyse a batch, in parallel when jobs > 1.
    fn analyse(&mut self, batch: &[SubProblem], attack: impl Fn(&SubProblem) -> bool + Sync) -> Result<Vec<Analysis>> {
        self.stats.analysed += batch.len();
        let run = |(n, sp): (usize, &SubProblem)| {
            let mut cfg = self.cfg.clone();
            cfg.attack.enabled &= attack(sp);
            cfg.seed = self.cfg.seed.wrapping_add((self.stats.analysed + n) as u64);
            analyse(self.problem, &sp.region, &cfg, self.deadline)
        };
        if self.bab.jobs > 1 {
            batch.par_iter().enumerate().map(run).collect()
        } else {
            batch.iter().enumerate().map(run).collect()
        }
    }

    fn done(&self, status: Status, last: Option<Verdict>) -> BabOutcome {
        let mut verdict = last.unwrap_or_else(|| Verdict::with_status(status));
        verdict.status = status;
        if status != Status::False {
            verdict.counterexample = None;
        }
        BabOutcome { verdict, stats: self.stats }
    }

    /// LIFO loop shared by both split modes. `branch` returns the children of
    /// an inconclusive subproblem, or `None` when it cannot be split.
    fn run(
        &mut self,
        root: SubProblem,
        attack: impl Fn(&SubProblem) -> bool + Sync,
        mut branch: impl FnMut(&SubProblem, &Analysis) -> Option<Vec<SubProblem>>,
    ) -> Result<BabOutcome> {
        let mut work = vec![root];
        let mut stuck = false;
        let mut root_verdict: Option<Verdict> = None;
        self.stats.max_worklist = 1;
        while !work.is_empty() {
            if self.past() {
                return Ok(self.done(Status::Timeout, None));
            }
            let take = self.bab.jobs.max(1).min(work.len());
            let batch: Vec<SubProblem> = (0..take).filter_map(|_| work.pop()).collect();
            let results = self.analyse(&batch, &attack)?;
            for a in &results {
                if a.verdict.status == Status::False {
                    return Ok(self.done(Status::False, Some(a.verdict.clone())));
                }
            }
            let mut children = Vec::new();
            for (sp, a) in batch.iter().zip(results) {
                if root_verdict.is_none() {
                    root_verdict = Some(a.verdict.clone());
                }
                match a.verdict.status {
                    Status::Timeout => return Ok(self.done(Status::Timeout, None)),
                    Status::True => self.stats.infeasible += usize::from(a.verdict.empty),
                    Status::Unknown => match branch(sp, &a) {
                        Some(c) => {
                            self.stats.splits += 1;
                            children.push(c);
                        }
                        None => stuck = true,
                    },
                    Status::False => unreachable!(),
                }
            }
            for c in children.into_iter().rev() {
                work.extend(c.into_iter().rev());
            }
            self.stats.max_worklist = self.stats.max_worklist.max(work.len());
        }
        let status = if stuck { Status::Unknown } else { Status::True };
        Ok(self.done(status, root_verdict))
    }
}

/// Input splitting: inconclusive boxes are cut into `k` slices along the
/// dimension with the largest `alpha_i * width_i`.
pub fn bab_input(problem: &Problem, b: &IntervalTensor, cfg: &AnalysisConfig, bab: &BabConfig, deadline: Option<Instant>) -> Result<BabOutcome> {
    if bab.k < 2 {
        return Err(Error::Config("input splits need k >= 2".into()));
    }
    let mut d = Driver { problem, cfg, bab: *bab, deadline, stats: BabStats::default() };
    let root = SubProblem { region: Region::new(b.clone()), depth: 0 };
    d.run(
        root,
        |_| true,
        |sp, a| {
            let alpha = a.relations.input.clone().unwrap_or_default();
            let dim = choose_dim(&alpha, &sp.region.input_box)?;
            Some(
                split_box(&sp.region.input_box, dim, bab.k)
                    .into_iter()
                    .map(|c| SubProblem { region: Region::new(c), depth: sp.depth + 1 })
                    .collect(),
            )
        },
    )
}

/// ReLU splitting: inconclusive subproblems fork on the sign of the unstable
/// neuron with the largest `(delta_pos + delta_neg) * influence`.
pub fn bab_relu(problem: &Problem, b: &IntervalTensor, cfg: &AnalysisConfig, bab: &BabConfig, deadline: Option<Instant>) -> Result<BabOutcome> {
    if !cfg.uses(DomainKind::Constrained) {
        return Err(Error::Config("ReLU splitting needs the constrained zonotope domain".into()));
    }
    let mut d = Driver { problem, cfg, bab: *bab, deadline, stats: BabStats::default() };
    let root = SubProblem { region: Region::new(b.clone()), depth: 0 };
    d.run(
        root,
        |sp| sp.depth == 0,
        |sp, a| {
            let n = choose_relu(&a.relations.relus, &sp.region.splits)?;
            Some(
                [Sign::Neg, Sign::Pos]
                    .into_iter()
                    .map(|s| {
                        let mut region = sp.region.clone();
                        region.splits.insert(n, s);
                        SubProblem { region, depth: sp.depth + 1 }
                    })
                    .collect(),
            )
        },
    )
}

/// Single analysis or one of the split strategies.
pub fn verify(problem: &Problem, mode: SplitMode, cfg: &AnalysisConfig, bab: &BabConfig, deadline: Option<Instant>) -> Result<BabOutcome> {
    let b = &problem.property.input_box;
    match mode {
        SplitMode::None => {
            let a = analyse(problem, &Region::new(b.clone()), cfg, deadline)?;
            Ok(BabOutcome { verdict: a.verdict, stats: BabStats { analysed: 1, max_worklist: 1, ..BabStats::default() } })
        }
        SplitMode::Input => bab_input(problem, b, cfg, bab, deadline),
        SplitMode::Relu => bab_relu(problem, b, cfg, bab, deadline),
    }
}
