use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{chunk, KnowledgeDoc, RagError, RagStore, SourceKind};

pub const CORPUS_MANIFEST: &str = "manifest.json";

/// Optional `manifest.json` at the corpus root. Files it does not list are
/// still ingested: `.srt`/`.vtt` as subtitles, everything else as API docs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorpusManifest {
    #[serde(default)]
    pub files: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub path: String,
    pub source_kind: SourceKind,
    #[serde(default)]
    pub title: Option<String>,
}

const TEXT_EXTENSIONS: &[&str] = &["txt", "md", "markdown", "rst", "srt", "vtt"];

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else if p.extension().and_then(|x| x.to_str()).is_some_and(|x| TEXT_EXTENSIONS.contains(&x)) {
            out.push(p);
        }
    }
    Ok(())
}

/// Ingests every text file under `dir`; returns (documents, chunks) added.
/// Files whose text is empty after caption stripping are skipped.
pub fn ingest_corpus_dir(
    store: &mut RagStore,
    dir: &Path,
    chunk_words: usize,
    overlap_words: usize,
) -> Result<(usize, usize), RagError> {
    let manifest: CorpusManifest = match fs::read_to_string(dir.join(CORPUS_MANIFEST)) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| RagError::Corpus(format!("{CORPUS_MANIFEST}: {e}")))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => CorpusManifest::default(),
        Err(e) => return Err(e.into()),
    };
    for entry in &manifest.files {
        if !dir.join(&entry.path).is_file() {
            return Err(RagError::Corpus(format!("manifest lists missing file `{}`", entry.path)));
        }
    }
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    let (mut docs, mut chunks) = (0, 0);
    for path in files {
        let rel = path.strip_prefix(dir).unwrap_or(&path).to_string_lossy().replace('\\', "/");
        let ext = path.extension().and_then(|x| x.to_str()).unwrap_or("");
        let listed = manifest.files.iter().find(|e| e.path == rel);
        let kind = listed.map(|e| e.source_kind).unwrap_or(if matches!(ext, "srt" | "vtt") {
            SourceKind::TutorialSubtitle
        } else {
            SourceKind::ApiDoc
        });
        let raw = fs::read_to_string(&path)?;
        let text = if matches!(ext, "srt" | "vtt") { chunk::strip_caption_markup(&raw) } else { raw };
        let title = listed
            .and_then(|e| e.title.clone())
            .unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        let doc = match KnowledgeDoc::new(rel.clone(), kind, title, text) {
            Ok(d) => d,
            Err(RagError::EmptyDocument) => {
                tracing::warn!(file = %rel, "skipping empty corpus document");
                continue;
            }
            Err(e) => return Err(e),
        };
        chunks += store.ingest(&doc, chunk_words, overlap_words)?;
        docs += 1;
    }
    Ok((docs, chunks))
}
