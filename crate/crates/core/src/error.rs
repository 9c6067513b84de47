use thiserror::Error;

/// Errors raised by domains, parsers and the analysis driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("infinite bound on dimension {0}")]
    InfiniteBound(usize),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unknown neuron {index} at node {node}")]
    UnknownNeuron { node: usize, index: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{format} parse error at line {line}, column {col}: {msg}")]
    Parse {
        format: &'static str,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid property: {0}")]
    Property(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("deadline exceeded")]
    Timeout,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(format: &'static str, line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse { format, line, col, msg: msg.into() }
    }

    /// True for errors caused by malformed input files.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Unsupported(_) | Error::Property(_) | Error::Graph(_))
    }
}
