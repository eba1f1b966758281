//! Embedding-based tool retrieval: cosine scoring and top-k selection.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Parallelism};
use crate::registry::{full_text, Registry};

/// Dimension of the default sentence encoder.
pub const DEFAULT_DIMENSION: usize = 768;

/// Default number of retrieved tools.
pub const DEFAULT_TOP_K: usize = 15;

/// Sidecar file name for a persisted index.
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("index file error: {0}")]
    IndexFile(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Cosine similarity clamped to [-1, 1]. Zero-norm vectors score 0.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dim() != b.dim() {
        return Err(RetrievalError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError>;
}

/// Offline bag-of-words embedder: signed feature hashing of lowercase
/// alphanumeric tokens, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        let mut values = vec![0.0; self.dimension];
        let lower = text.to_lowercase();
        for token in lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = fnv1a(token.as_bytes());
            let bucket = (h % self.dimension as u64) as usize;
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        }
        let v = EmbeddingVector(values);
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(v);
        }
        Ok(EmbeddingVector(v.0.into_iter().map(|x| x / norm).collect()))
    }
}

/// Embedding endpoint speaking the OpenAI `/embeddings` shape.
pub struct RemoteEmbedder {
    url: String,
    model: String,
    api_key: Option<String>,
    dimension: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        dimension: usize,
    ) -> Result<Self, RetrievalError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| RetrievalError::EmbedderUnavailable(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            model: model.into(),
            api_key,
            dimension,
            client,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RetrievalError> {
        let unavailable = |e: String| RetrievalError::EmbedderUnavailable(e);
        let mut req = self
            .client
            .post(&self.url)
            .json(&serde_json::json!({"model": self.model, "input": text}));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable(format!("status {}", resp.status())));
        }
        let body: serde_json::Value = resp.json().map_err(|e| unavailable(e.to_string()))?;
        let values: Vec<f64> = body["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| unavailable("response lacks data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().unwrap_or(f64::NAN))
            .collect();
        if values.len() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                left: values.len(),
                right: self.dimension,
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }
}

/// Which part of a manifest is embedded for each tool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedSource {
    #[default]
    Description,
    FullSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub name: String,
    pub vector: EmbeddingVector,
}

/// Flat list of pre-computed tool embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<IndexEntry>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, vector: EmbeddingVector) -> Result<(), RetrievalError> {
        if vector.dim() != self.dimension {
            return Err(RetrievalError::DimensionMismatch {
                left: vector.dim(),
                right: self.dimension,
            });
        }
        if vector.0.iter().any(|x| !x.is_finite()) {
            return Err(RetrievalError::NonFinite);
        }
        self.entries.push(IndexEntry {
            name: name.into(),
            vector,
        });
        Ok(())
    }

    /// Embeds every registry tool (in name order).
    pub fn build(
        registry: &Registry,
        embedder: &dyn Embedder,
        source: EmbedSource,
        mode: Parallelism,
    ) -> Result<Self, RetrievalError> {
        let handles: Vec<_> = registry.iter().collect();
        let vectors = par::map(mode, &handles, |h| {
            let text = match source {
                EmbedSource::Description => h.spec.description.clone(),
                EmbedSource::FullSpec => full_text(&h.spec),
            };
            embedder.embed(&text)
        });
        let mut index = Self::new(embedder.dimension());
        for (handle, vector) in handles.into_iter().zip(vectors) {
            index.insert(handle.name(), vector?)?;
        }
        Ok(index)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let text = serde_json::to_string(self).map_err(|e| RetrievalError::IndexFile(e.to_string()))?;
        fs::write(path, text).map_err(|e| RetrievalError::IndexFile(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(path).map_err(|e| RetrievalError::IndexFile(e.to_string()))?;
        let raw: VectorIndex =
            serde_json::from_str(&text).map_err(|e| RetrievalError::IndexFile(e.to_string()))?;
        let mut index = Self::new(raw.dimension);
        for entry in raw.entries {
            index.insert(entry.name, entry.vector)?;
        }
        Ok(index)
    }
}

/// Scores every entry against `query` in index order.
pub fn score_all(
    query: &EmbeddingVector,
    index: &VectorIndex,
    mode: Parallelism,
) -> Result<Vec<(String, f64)>, RetrievalError> {
    let scores = par::map(mode, index.entries(), |e| {
        cosine_similarity(query, &e.vector).map(|s| (e.name.clone(), s))
    });
    scores.into_iter().collect()
}

/// The `k` best entries, scores non-increasing, ties broken by name.
pub fn top_k(
    query: &EmbeddingVector,
    index: &VectorIndex,
    k: usize,
    mode: Parallelism,
) -> Result<Vec<(String, f64)>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let mut scored = score_all(query, index, mode)?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Embeds `query` and returns its `k` nearest tools.
pub fn top_k_tools(
    query: &str,
    embedder: &dyn Embedder,
    index: &VectorIndex,
    k: usize,
) -> Result<Vec<(String, f64)>, RetrievalError> {
    let q = embedder.embed(query)?;
    top_k(&q, index, k, Parallelism::default())
}
