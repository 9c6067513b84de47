//! Reading networks and properties from disk.
//!
//! Formats come from an explicit hint, else the file extension, else a look
//! at the first bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::nnet::{self, Normalization};
use crate::network::{json, onnx, NetworkGraph};
use crate::property::{textual, vnnlib, NormalizedProperty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkFormat {
    Onnx,
    Nnet,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyFormat {
    Vnnlib,
    Text,
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase())
}

fn first_char(bytes: &[u8]) -> Option<char> {
    bytes.iter().map(|&b| b as char).find(|c| !c.is_whitespace())
}

impl NetworkFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        match extension(path)?.as_str() {
            "onnx" => Some(Self::Onnx),
            "nnet" => Some(Self::Nnet),
            "json" => Some(Self::Json),
            _ => None,
        }
    }

    pub fn sniff(bytes: &[u8]) -> Self {
        match first_char(bytes) {
            Some('{') => Self::Json,
            Some(c) if c == '/' || c.is_ascii_digit() => Self::Nnet,
            _ => Self::Onnx,
        }
    }
}

impl PropertyFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        match extension(path)?.as_str() {
            "vnnlib" | "smt2" => Some(Self::Vnnlib),
            "prop" | "txt" => Some(Self::Text),
            _ => None,
        }
    }

    pub fn sniff(text: &str) -> Self {
        match first_char(text.as_bytes()) {
            Some('(') | Some(';') => Self::Vnnlib,
            _ => Self::Text,
        }
    }
}

fn utf8(bytes: Vec<u8>, format: &'static str) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::parse(format, 0, 0, format!("not UTF-8: {e}")))
}

pub fn network(path: &Path, format: Option<NetworkFormat>, normalization: Normalization) -> Result<NetworkGraph> {
    let bytes = std::fs::read(path)?;
    let format = format.or_else(|| NetworkFormat::from_extension(path)).unwrap_or_else(|| NetworkFormat::sniff(&bytes));
    match format {
        NetworkFormat::Onnx => onnx::parse(&bytes),
        NetworkFormat::Nnet => Ok(nnet::parse(&utf8(bytes, "nnet")?, normalization)?.graph),
        NetworkFormat::Json => json::parse(&utf8(bytes, "json")?),
    }
}

/// `outputs` is the network output count, used by `argmax` in the textual
/// syntax and to check atom indices.
pub fn property(path: &Path, format: Option<PropertyFormat>, inputs: usize, outputs: usize) -> Result<NormalizedProperty> {
    let text = std::fs::read_to_string(path)?;
    let format = format.or_else(|| PropertyFormat::from_extension(path)).unwrap_or_else(|| PropertyFormat::sniff(&text));
    let base = path.parent().unwrap_or(Path::new("."));
    let p = match format {
        PropertyFormat::Vnnlib => vnnlib::parse(&text)?,
        PropertyFormat::Text => textual::parse(&text, Some(outputs), base)?,
    };
    p.check_sizes(inputs, outputs)?;
    Ok(p)
}
