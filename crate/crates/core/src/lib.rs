//! Sound reachability analysis for feed-forward neural networks.

pub mod analysis;
pub mod bab;
pub mod constrained;
pub mod error;
pub mod hybrid;
pub mod interval;
pub mod load;
pub mod lp;
pub mod network;
pub mod property;
pub mod relax;
pub mod report;
pub mod zonotope;

pub use analysis::{analyse, Analysis, AnalysisConfig, Counterexample, DomainKind, Problem, Region, Status, Verdict};
pub use bab::{bab_input, bab_relu, verify, BabConfig, BabOutcome, SplitMode};
pub use error::{Error, Result};
pub use interval::{Interval, IntervalTensor, Rounding};
pub use load::{NetworkFormat, PropertyFormat};
pub use network::nnet::Normalization;
pub use network::NetworkGraph;
pub use property::NormalizedProperty;
pub use report::{Report, Settings};
pub use zonotope::{Allocator, SymbolId, Zonotope};
