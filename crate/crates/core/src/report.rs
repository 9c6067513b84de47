//! Versioned JSON record of one verification run.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "status": "True" | "False" | "Unknown" | "Timeout",
//!   "network": "net.onnx",
//!   "property": "prop.vnnlib",
//!   "settings": { "domains": ["box", "zono"], "split": "input", "k": 2, "sound": true,
//!                 "attack": true, "seed": 0, "timeout_secs": 60.0, "jobs": 1 },
//!   "counterexample": { "input": [..], "output": [..] } | null,
//!   "output_bounds": { "lower": [..], "upper": [..] } | null,
//!   "stats": { "layers": 7, "max_symbols": 120, "unstable_relus": 14, "dropped_domains": [],
//!              "subproblems": 31, "splits": 15, "max_worklist": 9, "infeasible": 0,
//!              "elapsed_secs": 0.12, "layer_secs": [["fc1", 0.001], ..] }
//! }
//! ```
//!
//! `elapsed_secs` and `layer_secs` appear only when timings were requested,
//! so two runs with the same settings and seed produce identical reports.

use serde::{Deserialize, Serialize};

use crate::analysis::{Counterexample, DomainKind, Status};
use crate::bab::{BabOutcome, SplitMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub domains: Vec<DomainKind>,
    pub split: SplitMode,
    pub k: usize,
    pub sound: bool,
    pub attack: bool,
    pub seed: u64,
    pub timeout_secs: f64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportStats {
    pub layers: usize,
    pub max_symbols: usize,
    pub unstable_relus: usize,
    pub dropped_domains: Vec<String>,
    pub subproblems: usize,
    pub splits: usize,
    pub max_worklist: usize,
    pub infeasible: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layer_secs: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub status: Status,
    pub network: String,
    pub property: String,
    pub settings: Settings,
    pub counterexample: Option<Counterexample>,
    pub output_bounds: Option<Bounds>,
    pub stats: ReportStats,
}

impl Report {
    /// `elapsed` is recorded only when `timings` is set.
    pub fn new(network: &str, property: &str, settings: Settings, outcome: &BabOutcome, timings: bool, elapsed: f64) -> Self {
        let v = &outcome.verdict;
        let stats = ReportStats {
            layers: v.stats.layers,
            max_symbols: v.stats.max_symbols,
            unstable_relus: v.stats.unstable_relus,
            dropped_domains: v.stats.dropped_domains.clone(),
            subproblems: outcome.stats.analysed,
            splits: outcome.stats.splits,
            max_worklist: outcome.stats.max_worklist,
            infeasible: outcome.stats.infeasible,
            elapsed_secs: timings.then_some(elapsed),
            layer_secs: if timings { v.stats.layer_secs.clone() } else { Vec::new() },
        };
        Self {
            schema_version: SCHEMA_VERSION,
            status: v.status,
            network: network.to_string(),
            property: property.to_string(),
            settings,
            counterexample: v.counterexample.clone(),
            output_bounds: v.output_bounds.as_ref().map(|b| Bounds { lower: b.lower.clone(), upper: b.upper.clone() }),
            stats,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
