//! Index file: a magic line, a JSON header line, a JSON line of chunk
//! metadata, then `chunk_count * dimension` little-endian f64 values.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Chunk, DocInfo, Embedder, RagError, RagStore};

const MAGIC: &str = "CLAPPER-RAG-INDEX";
pub const INDEX_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    embedder_id: String,
    dimension: usize,
    chunk_count: usize,
    docs: std::collections::BTreeMap<String, DocInfo>,
}

#[derive(Serialize, Deserialize)]
struct ChunkMeta {
    doc_id: String,
    chunk_index: usize,
    text: String,
}

impl RagStore {
    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        let header = Header {
            schema_version: INDEX_SCHEMA_VERSION,
            embedder_id: self.embedder.id(),
            dimension: self.embedder.dimension(),
            chunk_count: self.chunks.len(),
            docs: self.docs.clone(),
        };
        let meta: Vec<ChunkMeta> = self
            .chunks
            .iter()
            .map(|c| ChunkMeta { doc_id: c.doc_id.clone(), chunk_index: c.chunk_index, text: c.text.clone() })
            .collect();
        let mut buf = Vec::new();
        writeln!(buf, "{MAGIC}")?;
        serde_json::to_writer(&mut buf, &header).map_err(|e| RagError::Format(e.to_string()))?;
        buf.push(b'\n');
        serde_json::to_writer(&mut buf, &meta).map_err(|e| RagError::Format(e.to_string()))?;
        buf.push(b'\n');
        for c in &self.chunks {
            for x in &c.embedding {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&buf)?;
        tmp.persist(path).map_err(|e| RagError::Io(e.error))?;
        Ok(())
    }

    /// Loads an index; `embedder` must be the one it was built with.
    pub fn load(path: &Path, embedder: Arc<dyn Embedder>) -> Result<RagStore, RagError> {
        let bytes = fs::read(path)?;
        let mut lines = bytes.splitn(4, |b| *b == b'\n');
        let bad = |m: &str| RagError::Format(m.to_string());
        if lines.next() != Some(MAGIC.as_bytes()) {
            return Err(bad("missing magic line"));
        }
        let header: Header = serde_json::from_slice(lines.next().ok_or_else(|| bad("missing header"))?)
            .map_err(|e| RagError::Format(format!("header: {e}")))?;
        if header.schema_version != INDEX_SCHEMA_VERSION {
            return Err(bad(&format!("unsupported schema version {}", header.schema_version)));
        }
        if header.embedder_id != embedder.id() {
            return Err(RagError::EmbedderMismatch { stored: header.embedder_id, given: embedder.id() });
        }
        let meta: Vec<ChunkMeta> = serde_json::from_slice(lines.next().ok_or_else(|| bad("missing chunk table"))?)
            .map_err(|e| RagError::Format(format!("chunk table: {e}")))?;
        let blob = lines.next().unwrap_or(&[]);
        let dim = header.dimension;
        if meta.len() != header.chunk_count || blob.len() != meta.len() * dim * 8 {
            return Err(bad("chunk count or vector blob size disagrees with header"));
        }
        let chunks = meta
            .into_iter()
            .zip(blob.chunks_exact(dim * 8))
            .map(|(m, raw)| Chunk {
                doc_id: m.doc_id,
                chunk_index: m.chunk_index,
                text: m.text,
                embedding: raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect(),
            })
            .collect();
        Ok(RagStore { embedder, docs: header.docs, chunks })
    }
}
