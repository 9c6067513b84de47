//! Reader for the `.nnet` fully connected format.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{GraphBuilder, NetworkGraph, Op};

/// Normalization constants stored in the file header.
#[derive(Debug, Clone, PartialEq)]
pub struct NnetMetadata {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    /// Input means followed by the output mean.
    pub means: Vec<f64>,
    /// Input ranges followed by the output range.
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Fold input and output normalization into the first and last layers.
    #[default]
    Fold,
    /// Keep the raw weights; normalization is only reported as metadata.
    Raw,
}

#[derive(Debug, Clone)]
pub struct NnetModel {
    pub graph: NetworkGraph,
    pub metadata: NnetMetadata,
}

struct Lines<'a> {
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let mut iter = text.lines().enumerate().peekable();
        while let Some((_, l)) = iter.peek() {
            if l.trim_start().starts_with("//") || l.trim().is_empty() {
                iter.next();
            } else {
                break;
            }
        }
        Self { iter }
    }

    fn numbers(&mut self, section: &str, expected: usize) -> Result<Vec<f64>> {
        let (i, line) = loop {
            match self.iter.next() {
                None => return Err(Error::parse("nnet", 0, 0, format!("unexpected end of file in {section}"))),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some(x) => break x,
            }
        };
        let mut out = Vec::new();
        for (col, tok) in line.split(',').map(str::trim).filter(|t| !t.is_empty()).enumerate() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::parse("nnet", i + 1, col + 1, format!("invalid number {tok:?} in {section}")))?;
            out.push(v);
        }
        if out.len() < expected {
            return Err(Error::parse(
                "nnet",
                i + 1,
                out.len() + 1,
                format!("{section} has {} values, expected {expected}", out.len()),
            ));
        }
        out.truncate(expected);
        Ok(out)
    }
}

fn to_usize(v: f64, line: &str) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::parse("nnet", 0, 0, format!("{line} must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Parse `.nnet` text. Hidden layers use ReLU, the last layer is linear.
pub fn parse(text: &str, normalization: Normalization) -> Result<NnetModel> {
    let mut lines = Lines::new(text);
    let header = lines.numbers("header", 4)?;
    let layers = to_usize(header[0], "layer count")?;
    let n_in = to_usize(header[1], "input size")?;
    if layers == 0 {
        return Err(Error::parse("nnet", 0, 0, "network has no layers"));
    }
    let sizes = lines
        .numbers("layer sizes", layers + 1)?
        .into_iter()
        .map(|v| to_usize(v, "layer size"))
        .collect::<Result<Vec<_>>>()?;
    if sizes[0] != n_in || sizes[layers] != to_usize(header[2], "output size")? {
        return Err(Error::parse("nnet", 0, 0, "layer sizes disagree with the header"));
    }
    lines.numbers("symmetric flag", 0)?;
    let metadata = NnetMetadata {
        input_min: lines.numbers("input minimums", n_in)?,
        input_max: lines.numbers("input maximums", n_in)?,
        means: lines.numbers("means", n_in + 1)?,
        ranges: lines.numbers("ranges", n_in + 1)?,
    };

    let mut weights = Vec::with_capacity(layers);
    for k in 0..layers {
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let mut w = Array2::zeros((rows, cols));
        for i in 0..rows {
            let row = lines.numbers(&format!("weights of layer {}", k + 1), cols)?;
            w.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
        }
        let mut b = Vec::with_capacity(rows);
        for _ in 0..rows {
            b.push(lines.numbers(&format!("biases of layer {}", k + 1), 1)?[0]);
        }
        weights.push((w, b));
    }

    if normalization == Normalization::Fold {
        fold(&mut weights, &metadata)?;
    }

    let mut builder = GraphBuilder::new("input", vec![n_in]);
    for (k, (weight, bias)) in weights.into_iter().enumerate() {
        builder.then(format!("layer{}", k + 1), Op::Affine { weight, bias })?;
        if k + 1 < layers {
            builder.then(format!("relu{}", k + 1), Op::Relu)?;
        }
    }
    let out = builder.last();
    Ok(NnetModel { graph: builder.finish(out)?, metadata })
}

fn fold(weights: &mut [(Array2<f64>, Vec<f64>)], m: &NnetMetadata) -> Result<()> {
    let n_in = m.input_min.len();
    if m.ranges.iter().any(|r| *r == 0.0 || !r.is_finite()) {
        return Err(Error::Config("nnet normalization range must be finite and nonzero".into()));
    }
    let (w, b) = &mut weights[0];
    for j in 0..n_in {
        let (mean, range) = (m.means[j], m.ranges[j]);
        for i in 0..w.nrows() {
            let scaled = w[[i, j]] / range;
            b[i] -= scaled * mean;
            w[[i, j]] = scaled;
        }
    }
    let (w, b) = weights.last_mut().expect("at least one layer");
    let (mean, range) = (m.means[n_in], m.ranges[n_in]);
    w.mapv_inplace(|v| v * range);
    b.iter_mut().for_each(|v| *v = *v * range + mean);
    Ok(())
}
