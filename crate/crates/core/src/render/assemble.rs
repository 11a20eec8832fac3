use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::assets::{is_id_char, AssetCatalog, AssetError};
use crate::subprocess::SubProcessKind;

/// Appended to every script; captures keyframes and probes and writes the
/// result manifest.
pub const EPILOGUE: &str = include_str!("../../harness/epilogue.py");

pub const SNIPPETS_MARKER: &str = "# ==== generated snippets ====";
pub const EPILOGUE_MARKER: &str = "# ==== harness epilogue ====";

/// The exact text handed to the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledScript {
    pub text: String,
}

impl AssembledScript {
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }
}

/// Replaces `"asset:<id>"` string literals with the catalog's absolute path
/// for `<id>`.
pub fn rewrite_asset_refs(source: &str, catalog: &AssetCatalog) -> Result<String, AssetError> {
    const TAG: &str = "asset:";
    let mut out = String::with_capacity(source.len());
    let mut rest = source;
    while let Some(pos) = rest.find(TAG) {
        let quote = rest[..pos].chars().next_back();
        let after = &rest[pos + TAG.len()..];
        let id_len = after.find(|c: char| !is_id_char(c)).unwrap_or(after.len());
        let closing = after[id_len..].chars().next();
        match quote {
            Some(q @ ('"' | '\'')) if id_len > 0 && closing == Some(q) => {
                let id = &after[..id_len];
                let entry = catalog.get(id).ok_or_else(|| AssetError::UnknownAsset(id.to_string()))?;
                // A JSON string literal is also a valid Python literal.
                let literal = serde_json::to_string(&entry.path.to_string_lossy()).expect("string serializes");
                out.push_str(&rest[..pos - 1]);
                out.push_str(&literal);
                rest = &after[id_len + 1..];
            }
            _ => {
                out.push_str(&rest[..pos + TAG.len()]);
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// prelude, separator, snippets in the given order, epilogue.
pub fn assemble(
    prelude: &str,
    snippets: &[(SubProcessKind, &str)],
    catalog: &AssetCatalog,
) -> Result<AssembledScript, AssetError> {
    let mut text = String::new();
    text.push_str(prelude.trim_end());
    text.push_str("\n\n");
    text.push_str(SNIPPETS_MARKER);
    text.push('\n');
    for (kind, src) in snippets {
        text.push_str(&format!("\n# ---- {kind} ----\n"));
        text.push_str(&rewrite_asset_refs(src.trim_end(), catalog)?);
        text.push('\n');
    }
    text.push('\n');
    text.push_str(EPILOGUE_MARKER);
    text.push('\n');
    text.push_str(EPILOGUE);
    Ok(AssembledScript { text })
}
