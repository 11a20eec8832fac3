use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetCategory {
    Character,
    SceneObject,
    Armature,
    MotionClip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub asset_id: String,
    pub path: PathBuf,
    pub category: AssetCategory,
    pub display_name: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AssetError {
    #[error("asset id `{0}` is listed twice")]
    DuplicateId(String),
    #[error("asset `{id}` points at missing file {path}")]
    MissingFile { id: String, path: PathBuf },
    #[error("script references unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("asset id `{0}` may only contain letters, digits, `_`, `-`, `.` and `/`")]
    BadId(String),
    #[error("catalog {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '/')
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    entries: Vec<AssetEntry>,
}

/// The assets and rigs agents may refer to as `"asset:<id>"`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssetCatalog {
    entries: BTreeMap<String, AssetEntry>,
}

impl AssetCatalog {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Relative entry paths resolve against `base`; every file must exist.
    pub fn from_entries(entries: Vec<AssetEntry>, base: &Path) -> Result<Self, AssetError> {
        let mut map = BTreeMap::new();
        for mut e in entries {
            if e.asset_id.is_empty() || !e.asset_id.chars().all(is_id_char) {
                return Err(AssetError::BadId(e.asset_id));
            }
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
            if !e.path.exists() {
                return Err(AssetError::MissingFile { id: e.asset_id, path: e.path });
            }
            e.path = fs::canonicalize(&e.path)?;
            if map.contains_key(&e.asset_id) {
                return Err(AssetError::DuplicateId(e.asset_id));
            }
            map.insert(e.asset_id.clone(), e);
        }
        Ok(Self { entries: map })
    }

    /// Reads a `{"entries": [...]}` JSON file.
    pub fn load(path: &Path) -> Result<Self, AssetError> {
        let text = fs::read_to_string(path)?;
        let file: CatalogFile = serde_json::from_str(&text)
            .map_err(|e| AssetError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_entries(file.entries, path.parent().unwrap_or(Path::new(".")))
    }

    /// Rebuilds a catalog from entries recorded in a session log. Paths are
    /// taken as-is and not checked.
    pub fn from_recorded(entries: &[AssetEntry]) -> Self {
        Self { entries: entries.iter().map(|e| (e.asset_id.clone(), e.clone())).collect() }
    }

    pub fn get(&self, id: &str) -> Option<&AssetEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &AssetEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per asset for prompts.
    pub fn prompt_listing(&self) -> String {
        if self.entries.is_empty() {
            return "(no catalog assets; build geometry from primitives)".into();
        }
        self.entries
            .values()
            .map(|e| {
                let cat = serde_json::to_value(e.category).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                format!("- asset:{} ({cat}) {}", e.asset_id, e.display_name)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, path: &str) -> AssetEntry {
        AssetEntry { asset_id: id.into(), path: path.into(), category: AssetCategory::Character, display_name: id.into() }
    }

    #[test]
    fn loads_and_checks() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("fox.glb"), b"glb").unwrap();
        let cat = AssetCatalog::from_entries(vec![entry("fox", "fox.glb")], tmp.path()).unwrap();
        assert!(cat.get("fox").unwrap().path.is_absolute());
        assert!(cat.prompt_listing().contains("asset:fox (character) fox"));

        let dup = AssetCatalog::from_entries(vec![entry("fox", "fox.glb"), entry("fox", "fox.glb")], tmp.path());
        assert!(matches!(dup, Err(AssetError::DuplicateId(_))));
        let missing = AssetCatalog::from_entries(vec![entry("cat", "cat.glb")], tmp.path());
        assert!(matches!(missing, Err(AssetError::MissingFile { .. })));
        let bad = AssetCatalog::from_entries(vec![entry("a b", "fox.glb")], tmp.path());
        assert!(matches!(bad, Err(AssetError::BadId(_))));
    }

    #[test]
    fn json_file() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("walk.fbx"), b"fbx").unwrap();
        fs::write(
            tmp.path().join("catalog.json"),
            r#"{"entries":[{"asset_id":"walk","path":"walk.fbx","category":"motion_clip","display_name":"Walk cycle"}]}"#,
        )
        .unwrap();
        let cat = AssetCatalog::load(&tmp.path().join("catalog.json")).unwrap();
        assert_eq!(cat.get("walk").unwrap().category, AssetCategory::MotionClip);
    }
}
