//! Text encoding behind a frozen-embedding interface. The default
//! implementation maps each token through a seeded hash-derived table;
//! the sidecar implementation loads precomputed vectors (one JSON object
//! per line: {"token": ..., "vector": [...]}) so externally computed
//! embeddings can be plugged in offline.

use std::collections::HashMap;
use std::io::BufRead;

use ndarray::Array2;
use rand::Rng;
use thiserror::Error;

use crate::rng::{derive_rng, stable_hash};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("instruction text is empty")]
    EmptyText,
    #[error("token {0:?} missing from the sidecar embedding table")]
    UnknownToken(String),
    #[error("sidecar vector for {token:?} has dim {got}, expected {want}")]
    DimMismatch { token: String, got: usize, want: usize },
    #[error("malformed sidecar line {0}: {1}")]
    BadSidecarLine(usize, serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Lowercases and splits on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| c.is_whitespace() || (c.is_ascii_punctuation() && c != '-'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Deterministic per-token embeddings, one row per token.
pub trait TextEncoder {
    fn model_dim(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Array2<f64>, TextError>;
}

/// Frozen embedding table keyed by a stable token hash. Identical text
/// always produces identical matrices; no training ever touches it.
#[derive(Debug, Clone)]
pub struct HashTextEncoder {
    pub dim: usize,
    pub seed: u64,
}

impl HashTextEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashTextEncoder { dim, seed }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = derive_rng(self.seed, "text-embedding", stable_hash(token));
        let scale = (3.0 / self.dim as f64).sqrt();
        (0..self.dim).map(|_| rng.gen_range(-scale..scale)).collect()
    }
}

impl TextEncoder for HashTextEncoder {
    fn model_dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Array2<f64>, TextError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(TextError::EmptyText);
        }
        let mut out = Array2::zeros((tokens.len(), self.dim));
        for (i, tok) in tokens.iter().enumerate() {
            for (j, v) in self.token_vector(tok).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

#[derive(serde::Deserialize)]
struct SidecarLine {
    token: String,
    vector: Vec<f64>,
}

/// Embeddings loaded from a JSON-lines sidecar file.
#[derive(Debug, Clone)]
pub struct SidecarTextEncoder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl SidecarTextEncoder {
    pub fn from_reader<R: BufRead>(r: R, dim: usize) -> Result<Self, TextError> {
        let mut table = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: SidecarLine =
                serde_json::from_str(&line).map_err(|e| TextError::BadSidecarLine(lineno + 1, e))?;
            if entry.vector.len() != dim {
                return Err(TextError::DimMismatch {
                    token: entry.token,
                    got: entry.vector.len(),
                    want: dim,
                });
            }
            table.insert(entry.token, entry.vector);
        }
        Ok(SidecarTextEncoder { dim, table })
    }
}

impl TextEncoder for SidecarTextEncoder {
    fn model_dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Array2<f64>, TextError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(TextError::EmptyText);
        }
        let mut out = Array2::zeros((tokens.len(), self.dim));
        for (i, tok) in tokens.iter().enumerate() {
            let vec = self
                .table
                .get(tok)
                .ok_or_else(|| TextError::UnknownToken(tok.clone()))?;
            for (j, &v) in vec.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}
