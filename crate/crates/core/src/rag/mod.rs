//! Knowledge retrieval for agent prompts.
//!
//! Documents are split into overlapping word windows, embedded, and searched
//! with an exact cosine scan. A [`RagStore`] is built by a single writer and
//! then shared read-only (`Arc<RagStore>`) between sessions.

mod chunk;
mod corpus;
mod embed;
mod persist;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use chunk::{chunk_words, reassemble, strip_caption_markup};
pub use corpus::{ingest_corpus_dir, CorpusEntry, CorpusManifest};
pub use embed::{Embedder, HashingEmbedder, HttpEmbedder, DEFAULT_HASHING_DIM};

pub const DEFAULT_CHUNK_WORDS: usize = 200;
pub const DEFAULT_OVERLAP_WORDS: usize = 50;
pub const DEFAULT_TOP_K: usize = 5;

pub const CONTEXT_HEADER: &str = "=== Retrieved reference material ===";
pub const CONTEXT_FOOTER: &str = "=== End of reference material ===";

#[derive(Debug, thiserror::Error)]
pub enum RagError {
    #[error("embedder unreachable: {0}")]
    EmbedderUnreachable(String),
    #[error("retrieval over an empty store")]
    EmptyStore,
    #[error("document text is empty")]
    EmptyDocument,
    #[error("document `{0}` was already ingested")]
    DuplicateDoc(String),
    #[error("invalid chunking: chunk_words ({chunk}) must exceed overlap_words ({overlap})")]
    InvalidChunking { chunk: usize, overlap: usize },
    #[error("embedder produced {got}-dimensional vectors, store expects {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("index was built with embedder `{stored}`, not `{given}`")]
    EmbedderMismatch { stored: String, given: String },
    #[error("malformed index file: {0}")]
    Format(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    ApiDoc,
    TutorialSubtitle,
}

/// A knowledge document. Construction fails on empty text, so every
/// document that reaches [`RagStore::ingest`] has content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeDoc {
    doc_id: String,
    source_kind: SourceKind,
    title: String,
    text: String,
}

impl KnowledgeDoc {
    pub fn new(
        doc_id: impl Into<String>,
        source_kind: SourceKind,
        title: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self, RagError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(RagError::EmptyDocument);
        }
        Ok(Self { doc_id: doc_id.into(), source_kind, title: title.into(), text })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocInfo {
    pub source_kind: SourceKind,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    pub score: f64,
}

/// Hits in descending score order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<RetrievedChunk>,
}

impl RetrievalResult {
    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

pub struct RagStore {
    embedder: Arc<dyn Embedder>,
    docs: BTreeMap<String, DocInfo>,
    chunks: Vec<Chunk>,
}

impl fmt::Debug for RagStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RagStore")
            .field("embedder", &self.embedder.id())
            .field("docs", &self.docs.len())
            .field("chunks", &self.chunks.len())
            .finish()
    }
}

impl RagStore {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self { embedder, docs: BTreeMap::new(), chunks: Vec::new() }
    }

    pub fn embedder_id(&self) -> String {
        self.embedder.id()
    }

    pub fn dimension(&self) -> usize {
        self.embedder.dimension()
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Chunks and embeds `doc`; returns the number of chunks added.
    pub fn ingest(&mut self, doc: &KnowledgeDoc, chunk_words: usize, overlap_words: usize) -> Result<usize, RagError> {
        if chunk_words <= overlap_words {
            return Err(RagError::InvalidChunking { chunk: chunk_words, overlap: overlap_words });
        }
        if self.docs.contains_key(&doc.doc_id) {
            return Err(RagError::DuplicateDoc(doc.doc_id.clone()));
        }
        let texts = chunk::chunk_words(&doc.text, chunk_words, overlap_words);
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let embeddings = self.embedder.embed(&refs)?;
        let want = self.embedder.dimension();
        if let Some(bad) = embeddings.iter().find(|e| e.len() != want) {
            return Err(RagError::DimensionMismatch { want, got: bad.len() });
        }
        let n = texts.len();
        self.chunks.extend(texts.into_iter().zip(embeddings).enumerate().map(|(i, (text, embedding))| Chunk {
            doc_id: doc.doc_id.clone(),
            chunk_index: i,
            text,
            embedding,
        }));
        self.docs.insert(doc.doc_id.clone(), DocInfo { source_kind: doc.source_kind, title: doc.title.clone() });
        Ok(n)
    }

    /// Top-`k` chunks by cosine similarity; ties go to the lower
    /// `(doc_id, chunk_index)`.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<RetrievalResult, RagError> {
        if self.chunks.is_empty() {
            return Err(RagError::EmptyStore);
        }
        let q = self
            .embedder
            .embed(&[query])?
            .pop()
            .ok_or_else(|| RagError::EmbedderUnreachable("no embedding returned".into()))?;
        let mut scored: Vec<(f64, &Chunk)> = self.chunks.iter().map(|c| (cosine(&q, &c.embedding), c)).collect();
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.total_cmp(sa)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
                .then_with(|| a.chunk_index.cmp(&b.chunk_index))
        });
        let hits = scored
            .into_iter()
            .take(k)
            .map(|(score, c)| RetrievedChunk {
                doc_id: c.doc_id.clone(),
                chunk_index: c.chunk_index,
                text: c.text.clone(),
                score,
            })
            .collect();
        Ok(RetrievalResult { hits })
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Formats retrieved chunks under a delimited header, keeping whole chunks
/// while their combined length fits in `budget_chars`.
pub fn format_context(result: &RetrievalResult, budget_chars: usize) -> String {
    let mut out = String::from(CONTEXT_HEADER);
    out.push('\n');
    let mut used = 0;
    let mut included = 0;
    for hit in &result.hits {
        let block = format!("[{}#{}] {}\n", hit.doc_id, hit.chunk_index, hit.text);
        let len = block.chars().count();
        if used + len > budget_chars {
            break;
        }
        used += len;
        included += 1;
        out.push_str(&block);
    }
    if included == 0 && !result.hits.is_empty() {
        tracing::warn!(budget_chars, "context budget smaller than the best chunk; no context included");
    }
    out.push_str(CONTEXT_FOOTER);
    out
}

/// Appends the formatted context section to an already rendered prompt.
pub fn augment(prompt: &str, result: &RetrievalResult, budget_chars: usize) -> String {
    format!("{prompt}\n\n{}\n", format_context(result, budget_chars))
}
