//! `nnreach`: verify a property of a neural network from the command line.
//!
//! Exit codes: 0 True, 1 False, 2 Unknown, 3 Timeout, 64 usage, 65 unreadable
//! or malformed input, 70 internal failure, 74 report not writable. With
//! `--check-cex` the codes are 0 when the point satisfies the property and 1
//! when it violates it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use nnreach::{
    load, verify, AnalysisConfig, BabConfig, DomainKind, NetworkFormat, NetworkGraph, Normalization, NormalizedProperty,
    Problem, PropertyFormat, Report, Rounding, Settings, SplitMode, Status,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

fn parse_domain(s: &str) -> Result<DomainKind, String> {
    DomainKind::parse(s).map_err(|e| e.to_string())
}

/// Decode a lowercase enum name through its serde representation.
fn parse_name<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|_| format!("invalid value {s:?}"))
}

#[derive(Debug, Parser)]
#[command(name = "nnreach", version, about = "Sound reachability analysis and verification of neural networks")]
struct Args {
    /// Network file (.onnx, .nnet or .json).
    #[arg(long)]
    network: Option<PathBuf>,
    /// Network format, overriding the extension: onnx, nnet, json.
    #[arg(long, value_parser = parse_name::<NetworkFormat>)]
    network_format: Option<NetworkFormat>,
    /// Property file (.vnnlib or textual).
    #[arg(long)]
    property: Option<PathBuf>,
    /// Property format, overriding the extension: vnnlib, text.
    #[arg(long, value_parser = parse_name::<PropertyFormat>)]
    property_format: Option<PropertyFormat>,
    /// Comma-separated abstract domains: box, zono, czono, hzono.
    #[arg(long, value_delimiter = ',', value_parser = parse_domain)]
    domains: Option<Vec<DomainKind>>,
    /// Branch and bound strategy: none, input, relu.
    #[arg(long, value_parser = parse_name::<SplitMode>)]
    split: Option<SplitMode>,
    /// Parts per input split.
    #[arg(long)]
    k: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Outward rounding of every bound.
    #[arg(long, value_enum)]
    sound: Option<Switch>,
    /// Concrete counterexample search before abstract analysis.
    #[arg(long, value_enum)]
    attack: Option<Switch>,
    /// Seed for the counterexample search
    #[arg(long)]
    seed: Option<u64>,
    /// Subproblems analysed in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Evaluate one input instead of verifying: comma-separated values, a
    /// file of numbers, or a JSON report holding a counterexample.
    #[arg(long, value_name = "INPUT")]
    check_cex: Option<String>,
    /// Run specification in JSON; flags given alongside take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Handling of .nnet normalization constants: fold, raw.
    #[arg(long, value_parser = parse_name::<Normalization>)]
    nnet_normalization: Option<Normalization>,
    /// Record elapsed and per-layer times in the report.
    #[arg(long)]
    timings: bool,
}

/// Everything one run needs; `--config` files hold this structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSpec {
    network: Option<PathBuf>,
    network_format: Option<NetworkFormat>,
    property: Option<PathBuf>,
    property_format: Option<PropertyFormat>,
    domains: Vec<DomainKind>,
    split: SplitMode,
    k: usize,
    timeout_secs: f64,
    sound: bool,
    attack: bool,
    seed: u64,
    jobs: usize,
    report: Option<PathBuf>,
    nnet_normalization: Normalization,
    timings: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            network: None,
            network_format: None,
            property: None,
            property_format: None,
            domains: vec![DomainKind::Box, DomainKind::Zonotope],
            split: SplitMode::None,
            k: 2,
            timeout_secs: 300.0,
            sound: true,
            attack: true,
            seed: 0,
            jobs: 1,
            report: None,
            nnet_normalization: Normalization::Fold,
            timings: false,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    Internal(String),
    Output(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 64,
            Failure::Input(_) => 65,
            Failure::Internal(_) => 70,
            Failure::Output(_) => 74,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Internal(m) | Failure::Output(m) => m,
        }
    }
}

fn input_error(path: &Path, e: nnreach::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

impl RunSpec {
    fn from_args(args: &Args) -> Result<Self, Failure> {
        let mut spec = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e.into()))?;
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
            None => RunSpec::default(),
        };
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = args.$field.clone() {
                    spec.$field = v.into();
                }
            };
        }
        take!(network);
        take!(network_format);
        take!(property);
        take!(property_format);
        take!(domains);
        take!(split);
        take!(k);
        take!(seed);
        take!(jobs);
        take!(report);
        take!(nnet_normalization);
        if let Some(t) = args.timeout {
            spec.timeout_secs = t;
        }
        if let Some(s) = args.sound {
            spec.sound = s.on();
        }
        if let Some(a) = args.attack {
            spec.attack = a.on();
        }
        spec.timings |= args.timings;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), Failure> {
        let usage = |m: &str| Err(Failure::Usage(m.to_string()));
        if self.network.is_none() || self.property.is_none() {
            return usage("both --network and --property are required");
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return usage("--timeout must be a positive number of seconds");
        }
        if self.k < 2 {
            return usage("--k must be at least 2");
        }
        if self.jobs == 0 {
            return usage("--jobs must be at least 1");
        }
        if self.domains.is_empty() {
            return usage("--domains must name at least one domain");
        }
        if self.split == SplitMode::Relu && !self.domains.contains(&DomainKind::Constrained) {
            return usage("--split relu requires the czono domain");
        }
        Ok(())
    }

    fn analysis(&self) -> AnalysisConfig {
        let mut cfg = AnalysisConfig::with_domains(&self.domains);
        cfg.rounding = if self.sound { Rounding::Sound } else { Rounding::Fast };
        cfg.attack.enabled = self.attack;
        cfg.seed = self.seed;
        cfg.layer_timings = self.timings;
        cfg
    }

    fn settings(&self, cfg: &AnalysisConfig) -> Settings {
        Settings {
            domains: cfg.domains.clone(),
            split: self.split,
            k: self.k,
            sound: self.sound,
            attack: self.attack,
            seed: self.seed,
            timeout_secs: self.timeout_secs,
            jobs: self.jobs,
        }
    }
}

fn load_inputs(spec: &RunSpec) -> Result<(NetworkGraph, NormalizedProperty), Failure> {
    let (net_path, prop_path) = (spec.network.as_deref().unwrap(), spec.property.as_deref().unwrap());
    let network = load::network(net_path, spec.network_format, spec.nnet_normalization).map_err(|e| input_error(net_path, e))?;
    log::info!("{}: {} nodes, {} inputs, {} outputs", net_path.display(), network.nodes.len(), network.input_len(), network.output_len());
    let property = load::property(prop_path, spec.property_format, network.input_len(), network.output_len())
        .map_err(|e| input_error(prop_path, e))?;
    Ok((network, property))
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace() || c == '[' || c == ']')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("invalid number {t:?}")))
        .collect()
}

/// Input vector of `--check-cex`.
fn cex_input(arg: &str) -> Result<Vec<f64>, Failure> {
    let path = Path::new(arg);
    if !path.is_file() {
        return numbers(arg).map_err(Failure::Usage);
    }
    let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e.into()))?;
    if text.trim_start().starts_with('{') {
        let report: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{arg}: {e}")))?;
        let input = report
            .pointer("/counterexample/input")
            .and_then(|v| serde_json::from_value::<Vec<f64>>(v.clone()).ok())
            .ok_or_else(|| Failure::Input(format!("{arg}: report holds no counterexample")))?;
        return Ok(input);
    }
    numbers(&text).map_err(|m| Failure::Input(format!("{arg}: {m}")))
}

/// Concrete inference at `x` followed by the predicate; `Ok(true)` when the
/// property is violated.
fn check_cex(network: &NetworkGraph, property: &NormalizedProperty, x: &[f64]) -> Result<bool, Failure> {
    if x.len() != network.input_len() {
        return Err(Failure::Input(format!("expected {} input values, found {}", network.input_len(), x.len())));
    }
    if !property.input_box.contains_point(x) {
        return Err(Failure::Input("input lies outside the property box".into()));
    }
    let y = network.infer(x).map_err(|e| Failure::Internal(e.to_string()))?;
    Ok(!property.predicate.holds_at(x, &y))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn exit_code(status: Status) -> u8 {
    match status {
        Status::True => 0,
        Status::False => 1,
        Status::Unknown => 2,
        Status::Timeout => 3,
    }
}

fn run(args: Args) -> Result<u8, Failure> {
    let spec = RunSpec::from_args(&args)?;
    spec.validate()?;
    let cfg = spec.analysis();
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (network, property) = load_inputs(&spec)?;

    if let Some(arg) = &args.check_cex {
        let x = cex_input(arg)?;
        let violates = check_cex(&network, &property, &x)?;
        println!("{}", if violates { "violates" } else { "satisfies" });
        return Ok(u8::from(violates));
    }

    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(spec.timeout_secs);
    let problem = Problem::new(network, property, &cfg).map_err(|e| Failure::Input(e.to_string()))?;
    let bab = BabConfig { k: spec.k, jobs: spec.jobs };
    let outcome = verify(&problem, spec.split, &cfg, &bab, Some(deadline)).map_err(|e| match e {
        nnreach::Error::Config(m) => Failure::Usage(m),
        e => Failure::Internal(e.to_string()),
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    let verdict = &outcome.verdict;
    match &verdict.counterexample {
        Some(c) => println!("{} input={} output={}", verdict.status.as_str(), join(&c.input), join(&c.output)),
        None => {
            let (n, s) = (outcome.stats.analysed, outcome.stats.splits);
            println!("{} ({n} {}, {s} {})", verdict.status.as_str(), plural(n, "subproblem"), plural(s, "split"));
        }
    }

    if let Some(path) = &spec.report {
        let name = |p: &Option<PathBuf>| p.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
        let report = Report::new(&name(&spec.network), &name(&spec.property), spec.settings(&cfg), &outcome, spec.timings, elapsed);
        std::fs::write(path, report.to_json() + "\n").map_err(|e| Failure::Output(format!("{}: {e}", path.display())))?;
    }
    Ok(exit_code(verdict.status))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    match run(args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("nnreach: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 { word.to_string() } else { format!("{word}s") }
}
