use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::RagError;

/// Turns texts into fixed-dimension vectors.
pub trait Embedder: Send + Sync {
    /// Stable identifier persisted in index headers.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, RagError>;
}

/// Offline embedder: unigram and bigram feature hashing with signed buckets,
/// L2-normalized. Pure function of its input.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

pub const DEFAULT_HASHING_DIM: usize = 256;

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim }
    }

    fn add(&self, v: &mut [f64], feature: &str) {
        let h = fnv1a(feature.as_bytes());
        let bucket = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let tokens = tokens(text);
        let mut v = vec![0.0; self.dim];
        for t in &tokens {
            self.add(&mut v, t);
        }
        for pair in tokens.windows(2) {
            self.add(&mut v, &format!("{}\u{1f}{}", pair[0], pair[1]));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_HASHING_DIM)
    }
}

impl Embedder for HashingEmbedder {
    fn id(&self) -> String {
        format!("hashing-fnv1a-{}", self.dim)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, RagError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            let core: String = w.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
            if core.is_empty() {
                w.to_string()
            } else {
                core
            }
        })
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Client for an OpenAI-compatible `/embeddings` endpoint.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    model: String,
    dim: usize,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, model: impl Into<String>, dim: usize) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client builds");
        Self { client, base_url: base_url.into(), api_key, model: model.into(), dim }
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http-{}-{}", self.model, self.dim)
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, RagError> {
        let url = format!("{}/embeddings", self.base_url.trim_end_matches('/'));
        let mut req = self.client.post(&url).json(&EmbeddingRequest { model: &self.model, input: texts });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| RagError::EmbedderUnreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(RagError::EmbedderUnreachable(format!("{url} answered {}", resp.status())));
        }
        let mut body: EmbeddingResponse =
            resp.json().map_err(|e| RagError::EmbedderUnreachable(format!("bad embedding response: {e}")))?;
        body.data.sort_by_key(|d| d.index);
        if body.data.len() != texts.len() || body.data.iter().any(|d| d.embedding.len() != self.dim) {
            return Err(RagError::EmbedderUnreachable("embedding response shape mismatch".into()));
        }
        Ok(body.data.into_iter().map(|d| d.embedding).collect())
    }
}
