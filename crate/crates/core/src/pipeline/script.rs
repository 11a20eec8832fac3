use serde::{Deserialize, Serialize};

use crate::library::ScriptSnippet;
use crate::subprocess::SubProcessKind;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("sub-process `{0}` is already in the script")]
pub struct DuplicateSubprocess(pub SubProcessKind);

/// Accepted snippets in decomposition order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccumulatedScript {
    entries: Vec<(SubProcessKind, ScriptSnippet)>,
    /// Library version used when the script was last assembled.
    pub prelude_version: u64,
}

impl AccumulatedScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(SubProcessKind, ScriptSnippet)] {
        &self.entries
    }

    pub fn contains(&self, kind: SubProcessKind) -> bool {
        self.entries.iter().any(|(k, _)| *k == kind)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends, leaving existing entries untouched.
    pub fn accumulate(&self, kind: SubProcessKind, snippet: ScriptSnippet) -> Result<Self, DuplicateSubprocess> {
        if self.contains(kind) {
            return Err(DuplicateSubprocess(kind));
        }
        let mut next = self.clone();
        next.entries.push((kind, snippet));
        Ok(next)
    }

    /// `(kind, source)` pairs for assembly.
    pub fn sources(&self) -> Vec<(SubProcessKind, &str)> {
        self.entries.iter().map(|(k, s)| (*k, s.source.as_str())).collect()
    }

    /// Snippet text with a header line per entry; byte-stable.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (kind, s) in &self.entries {
            out.push_str(&format!("# ---- {kind} ----\n"));
            out.push_str(s.source.trim_end());
            out.push('\n');
        }
        out
    }
}
