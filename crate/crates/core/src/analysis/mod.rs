//! Forward abstract analysis of a network against a property.

pub mod attack;
mod boxes;
mod engine;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::constrained::{DualConfig, NeuronRef, Sign};
use crate::error::{Error, Result};
use crate::hybrid::DEFAULT_BINARY_LIMIT;
use crate::interval::{IntervalTensor, Rounding};
use crate::network::{rewrite, NetworkGraph, ValueRef};
use crate::property::{append_property_layer, NormalizedProperty, Predicate, Tri};
use crate::zonotope::SymbolId;

pub use attack::{search_counterexample, AttackConfig};
pub use engine::{analyse, forward, Forward};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Box,
    #[serde(rename = "zono", alias = "zonotope")]
    Zonotope,
    #[serde(rename = "czono", alias = "constrained")]
    Constrained,
    #[serde(rename = "hzono", alias = "hybrid")]
    Hybrid,
}

impl DomainKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "box" => Ok(DomainKind::Box),
            "zono" | "zonotope" => Ok(DomainKind::Zonotope),
            "czono" | "constrained" => Ok(DomainKind::Constrained),
            "hzono" | "hybrid" => Ok(DomainKind::Hybrid),
            other => Err(Error::Config(format!("unknown domain {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Box => "box",
            DomainKind::Zonotope => "zono",
            DomainKind::Constrained => "czono",
            DomainKind::Hybrid => "hzono",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Domains run side by side. The box domain always runs.
    pub domains: Vec<DomainKind>,
    pub rounding: Rounding,
    /// Cap on zonotope noise symbols; `None` disables reduction.
    pub max_symbols: Option<usize>,
    pub dual: DualConfig,
    pub binary_limit: usize,
    /// Evaluate atoms on an appended `C y` layer instead of output intervals.
    pub property_layer: bool,
    pub simplify: bool,
    pub rewrite_maxpool: bool,
    pub attack: AttackConfig,
    pub seed: u64,
    /// Record wall time per layer in the statistics.
    pub layer_timings: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            domains: vec![DomainKind::Box, DomainKind::Zonotope],
            rounding: Rounding::Sound,
            max_symbols: None,
            dual: DualConfig::default(),
            binary_limit: DEFAULT_BINARY_LIMIT,
            property_layer: true,
            simplify: true,
            rewrite_maxpool: true,
            attack: AttackConfig::default(),
            seed: 0,
            layer_timings: false,
        }
    }
}

impl AnalysisConfig {
    pub fn with_domains(domains: &[DomainKind]) -> Self {
        let mut cfg = Self { domains: domains.to_vec(), ..Self::default() };
        cfg.normalize();
        cfg
    }

    /// Sort, deduplicate and make sure the box domain is present.
    pub fn normalize(&mut self) {
        self.domains.push(DomainKind::Box);
        self.domains.sort();
        self.domains.dedup();
    }

    pub fn uses(&self, d: DomainKind) -> bool {
        self.domains.contains(&d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_symbols == Some(0) {
            return Err(Error::Config("max_symbols must be positive".into()));
        }
        if self.uses(DomainKind::Hybrid) && self.binary_limit == 0 {
            return Err(Error::Config("hybrid zonotopes need a positive binary limit".into()));
        }
        if self.dual.iterations == 0 || !(self.dual.step > 0.0) {
            return Err(Error::Config("dual iterations and step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    True,
    False,
    Unknown,
    Timeout,
}

impl Status {
    pub fn from_tri(t: Tri) -> Self {
        match t {
            Tri::True => Status::True,
            Tri::False => Status::False,
            Tri::Unknown => Status::Unknown,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::True => "True",
            Status::False => "False",
            Status::Unknown => "Unknown",
            Status::Timeout => "Timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub layers: usize,
    pub max_symbols: usize,
    pub unstable_relus: usize,
    pub dropped_domains: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub layer_secs: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub status: Status,
    pub counterexample: Option<Counterexample>,
    /// Bounds of the network outputs (before any property layer).
    pub output_bounds: Option<IntervalTensor>,
    /// The analysed region is provably empty.
    pub empty: bool,
    pub stats: Stats,
}

impl Verdict {
    pub(crate) fn with_status(status: Status) -> Self {
        Self { status, counterexample: None, output_bounds: None, empty: false, stats: Stats::default() }
    }
}

/// An unstable ReLU seen during the pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluInfo {
    pub neuron: NeuronRef,
    pub lower: f64,
    pub upper: f64,
    /// Summed absolute output coefficient of the neuron's relaxation symbol.
    pub influence: f64,
}

/// Input-to-output relations used by the branching heuristics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Relations {
    /// `sum_j |coefficient of input symbol i in output j|`, or a finite
    /// difference estimate of the same quantity without relational domains.
    pub input: Option<Vec<f64>>,
    pub relus: Vec<ReluInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub verdict: Verdict,
    pub relations: Relations,
}

/// Region of one analysis: an input box and forced ReLU signs.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub input_box: IntervalTensor,
    pub splits: BTreeMap<NeuronRef, Sign>,
}

impl Region {
    pub fn new(input_box: IntervalTensor) -> Self {
        Self { input_box, splits: BTreeMap::new() }
    }
}

/// Network and property prepared for analysis.
#[derive(Debug, Clone)]
pub struct Problem {
    /// The network as loaded; counterexamples are confirmed on it.
    pub network: NetworkGraph,
    pub property: NormalizedProperty,
    /// Rewritten network, possibly ending with a property layer.
    pub graph: NetworkGraph,
    /// Predicate over the outputs of `graph`.
    pub predicate: Predicate,
    /// Node of `graph` holding the network outputs.
    pub output: ValueRef,
}

impl Problem {
    pub fn new(network: NetworkGraph, property: NormalizedProperty, cfg: &AnalysisConfig) -> Result<Self> {
        property.check_sizes(network.input_len(), network.output_len())?;
        let mut graph = network.clone();
        if cfg.rewrite_maxpool {
            graph = rewrite::rewrite_maxpool(&graph)?;
        }
        if cfg.simplify {
            let order_only = property.predicate.is_order_only();
            graph = rewrite::simplify(&graph, order_only)?;
        }
        let output = graph.output;
        let mut predicate = property.predicate.clone();
        if cfg.property_layer {
            let (g2, p2) = append_property_layer(&graph, &property)?;
            graph = g2;
            predicate = p2.predicate;
        }
        Ok(Self { network, property, graph, predicate, output })
    }

    /// Concrete check of a point against the original network and property.
    pub fn confirm(&self, x: &[f64]) -> Option<Counterexample> {
        if !self.property.input_box.contains_point(x) {
            return None;
        }
        let y = self.network.infer(x).ok()?;
        if y.iter().any(|v| v.is_nan()) || self.property.predicate.holds_at(x, &y) {
            return None;
        }
        Some(Counterexample { input: x.to_vec(), output: y })
    }
}

pub(crate) fn influence_of(symbol: SymbolId, generators: &ndarray::Array2<f64>, symbols: &[SymbolId]) -> f64 {
    symbols.binary_search(&symbol).map_or(0.0, |k| generators.column(k).iter().map(|v| v.abs()).sum())
}

pub(crate) fn elapsed(d: Duration) -> f64 {
    d.as_secs_f64()
}
