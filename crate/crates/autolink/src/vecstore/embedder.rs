//! Embedding interface and the deterministic local embedder.

use crate::error::{Error, Result};
use crate::fnv::fnv1a64;

/// Maps texts to unit-norm vectors of a fixed dimension. Implementations
/// must be deterministic: the same text always yields the same vector.
pub trait Embedder: Send + Sync {
    /// Stable identifier recorded in indexes for compatibility checks.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    /// Returns one vector per input text, each with L2 norm 1.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>>;
}

/// Hashed bag-of-tokens embedder. Needs no model assets, runs anywhere,
/// and gives reproducible vectors, which makes it the default for tests
/// and offline runs.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub const DEFAULT_DIM: usize = 64;

    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Embedder("embedding dimension must be positive".into()));
        }
        Ok(HashEmbedder { dim })
    }

    pub fn default64() -> Self {
        HashEmbedder {
            dim: Self::DEFAULT_DIM,
        }
    }

    fn embed_one(&self, text: &str) -> Vec<f32> {
        let mut vector = vec![0.0f32; self.dim];
        for token in tokenize(text) {
            let hash = fnv1a64(token.as_bytes());
            let bucket = (hash % self.dim as u64) as usize;
            let sign = if (hash >> 32) & 1 == 1 { 1.0 } else { -1.0 };
            vector[bucket] += sign;
        }
        let norm = vector.iter().map(|v| v * v).sum::<f32>().sqrt();
        if norm == 0.0 {
            vector[0] = 1.0;
        } else {
            for value in &mut vector {
                *value /= norm;
            }
        }
        vector
    }
}

/// Lowercased runs of alphanumeric characters.
fn tokenize(text: &str) -> Vec<String> {
    text.split(|ch: char| !ch.is_alphanumeric())
        .filter(|token| !token.is_empty())
        .map(|token| token.to_lowercase())
        .collect()
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-v1-d{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>> {
        Ok(texts.iter().map(|text| self.embed_one(text)).collect())
    }
}
