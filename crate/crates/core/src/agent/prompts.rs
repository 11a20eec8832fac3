//! Prompt templates with `{name}` placeholders.
//!
//! Built-in templates are compiled in; a directory of `<id>.txt` files (and
//! `checklists/<kind>.txt`) overrides them without a rebuild. `{{` and `}}`
//! produce literal braces. Placeholders are substituted in one pass, so
//! values are never re-expanded.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::subprocess::SubProcessKind;

pub const DIRECTOR: &str = "director";
pub const PROGRAMMER: &str = "programmer";
pub const LIBRARY_UPDATE: &str = "library_update";
pub const REVIEWER: &str = "reviewer";

const BUILTIN: &[(&str, &str)] = &[
    (DIRECTOR, include_str!("../../templates/director.txt")),
    (PROGRAMMER, include_str!("../../templates/programmer.txt")),
    (LIBRARY_UPDATE, include_str!("../../templates/library_update.txt")),
    (REVIEWER, include_str!("../../templates/reviewer.txt")),
];

const BUILTIN_CHECKLISTS: [(SubProcessKind, &str); 5] = [
    (SubProcessKind::Scene, include_str!("../../templates/checklists/scene.txt")),
    (SubProcessKind::Character, include_str!("../../templates/checklists/character.txt")),
    (SubProcessKind::Motion, include_str!("../../templates/checklists/motion.txt")),
    (SubProcessKind::Lighting, include_str!("../../templates/checklists/lighting.txt")),
    (SubProcessKind::Cinematography, include_str!("../../templates/checklists/cinematography.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template `{template}` uses unknown placeholder `{{{name}}}`")]
    UnknownPlaceholder { template: String, name: String },
    #[error("no template with id `{0}`")]
    UnknownTemplate(String),
    #[error("reading template {path}: {message}")]
    Io { path: String, message: String },
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Placeholder names used by `text`. Brace groups that are not identifiers
/// (JSON examples, for instance) are left alone.
pub fn placeholders(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(i) = rest.find('{') {
        let after = &rest[i + 1..];
        if let Some(escaped) = after.strip_prefix('{') {
            rest = escaped;
            continue;
        }
        if let Some(j) = after.find('}') {
            if is_ident(&after[..j]) {
                out.insert(after[..j].to_string());
            }
        }
        rest = after;
    }
    out
}

/// Substitutes `vars` into `text`.
pub fn render(id: &str, text: &str, vars: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut lit = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push_str(&text[lit..i + 1]);
                i += 2;
                lit = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push_str(&text[lit..i + 1]);
                i += 2;
                lit = i;
            }
            b'{' => {
                let Some(close) = text[i + 1..].find('}') else {
                    i += 1;
                    continue;
                };
                let name = &text[i + 1..i + 1 + close];
                if is_ident(name) {
                    let value = vars
                        .get(name)
                        .ok_or_else(|| TemplateError::UnknownPlaceholder { template: id.into(), name: name.into() })?;
                    out.push_str(&text[lit..i]);
                    out.push_str(value);
                    i += close + 2;
                    lit = i;
                } else {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    out.push_str(&text[lit..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
    checklists: BTreeMap<SubProcessKind, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            checklists: BUILTIN_CHECKLISTS.iter().map(|(k, v)| (*k, v.to_string())).collect(),
        }
    }
}

impl TemplateSet {
    /// Built-ins overlaid with every `*.txt` in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let io = |p: &Path, e: std::io::Error| TemplateError::Io { path: p.display().to_string(), message: e.to_string() };
        let mut set = Self::default();
        let entries = fs::read_dir(dir).map_err(|e| io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                set.templates.insert(id, fs::read_to_string(&path).map_err(|e| io(&path, e))?);
            }
        }
        for kind in SubProcessKind::ALL {
            let path = dir.join("checklists").join(format!("{kind}.txt"));
            if path.is_file() {
                set.checklists.insert(kind, fs::read_to_string(&path).map_err(|e| io(&path, e))?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, id: &str) -> Result<&str, TemplateError> {
        self.templates.get(id).map(String::as_str).ok_or_else(|| TemplateError::UnknownTemplate(id.into()))
    }

    pub fn render(&self, id: &str, vars: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        render(id, self.get(id)?, vars)
    }

    /// Evaluation questions for a kind, one per non-blank, non-`#` line.
    pub fn checklist(&self, kind: SubProcessKind) -> Vec<String> {
        self.checklists
            .get(&kind)
            .map(|t| {
                t.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    }
}
