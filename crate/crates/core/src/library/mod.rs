//! Versioned store of engine-script functions that snippets are built from.
//!
//! A [`FunctionLibrary`] is an immutable value: [`FunctionLibrary::apply_update`]
//! returns a new library and leaves the old one intact, so every version a
//! session passed through stays available for replay. Function bodies are
//! shared between versions through `Arc`, which makes forks cheap.

mod function;
pub mod scan;
mod seed;
mod store;
mod validate;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use function::{BodyParseError, LibraryFunction, Param, Provenance};
pub use scan::{Call, ParamKind, SourceParseError};
pub use seed::{seed_library, SEED_FUNCTION_NAMES};
pub use store::{LibraryStore, Manifest, ManifestEntry, StoreError};
pub use validate::{validate_snippet, ArityIssue, ArityProblem, ScriptSnippet, UnknownCall, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LibraryError {
    #[error("function `{0}` already exists")]
    NameConflict(String),
    #[error("no function named `{0}`")]
    UnknownFunction(String),
    #[error(transparent)]
    BodyParse(#[from] BodyParseError),
    #[error("invalid update: {0}")]
    InvalidUpdate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateAction {
    Add,
    Replace,
    Remove,
}

/// One mutation requested by the Programmer agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryUpdate {
    pub action: UpdateAction,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<LibraryFunction>,
    pub reason: String,
}

impl LibraryUpdate {
    pub fn add(function: LibraryFunction, reason: impl Into<String>) -> Self {
        Self { action: UpdateAction::Add, name: function.name.clone(), function: Some(function), reason: reason.into() }
    }

    pub fn replace(function: LibraryFunction, reason: impl Into<String>) -> Self {
        Self { action: UpdateAction::Replace, name: function.name.clone(), function: Some(function), reason: reason.into() }
    }

    pub fn remove(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { action: UpdateAction::Remove, name: name.into(), function: None, reason: reason.into() }
    }
}

/// Name and version of the library a fork was taken from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryRef {
    pub name: String,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionLibrary {
    name: String,
    functions: BTreeMap<String, Arc<LibraryFunction>>,
    library_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<LibraryRef>,
}

impl FunctionLibrary {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), functions: BTreeMap::new(), library_version: 1, parent: None }
    }

    /// Assembles a library from already-versioned functions, e.g. on load.
    pub(crate) fn from_parts(
        name: String,
        library_version: u64,
        parent: Option<LibraryRef>,
        functions: impl IntoIterator<Item = LibraryFunction>,
    ) -> Result<Self, LibraryError> {
        let mut map = BTreeMap::new();
        for f in functions {
            f.check()?;
            if map.insert(f.name.clone(), Arc::new(f.clone())).is_some() {
                return Err(LibraryError::NameConflict(f.name));
            }
        }
        Ok(Self { name, functions: map, library_version, parent })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u64 {
        self.library_version
    }

    pub fn parent(&self) -> Option<&LibraryRef> {
        self.parent.as_ref()
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&LibraryFunction> {
        self.functions.get(name).map(Arc::as_ref)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.functions.contains_key(name)
    }

    /// Functions in lexicographic name order.
    pub fn functions(&self) -> impl Iterator<Item = &LibraryFunction> {
        self.functions.values().map(Arc::as_ref)
    }

    /// Copy-on-write fork. The fork keeps the version counter so versions
    /// stay monotone along the lineage.
    pub fn fork(&self, name: impl Into<String>) -> FunctionLibrary {
        FunctionLibrary {
            name: name.into(),
            functions: self.functions.clone(),
            library_version: self.library_version,
            parent: Some(LibraryRef { name: self.name.clone(), version: self.library_version }),
        }
    }

    pub fn apply_update(&self, update: &LibraryUpdate) -> Result<FunctionLibrary, LibraryError> {
        let mut functions = self.functions.clone();
        match update.action {
            UpdateAction::Add => {
                let f = self.incoming(update)?;
                if functions.contains_key(&f.name) {
                    return Err(LibraryError::NameConflict(f.name));
                }
                let f = LibraryFunction { version: 1, provenance: Provenance::AgentComposed, ..f };
                functions.insert(f.name.clone(), Arc::new(f));
            }
            UpdateAction::Replace => {
                let f = self.incoming(update)?;
                let old = functions
                    .get(&f.name)
                    .ok_or_else(|| LibraryError::UnknownFunction(f.name.clone()))?;
                let f = LibraryFunction { version: old.version + 1, provenance: Provenance::AgentUpdated, ..f };
                functions.insert(f.name.clone(), Arc::new(f));
            }
            UpdateAction::Remove => {
                if update.function.is_some() {
                    return Err(LibraryError::InvalidUpdate("remove carries a function body".into()));
                }
                functions
                    .remove(&update.name)
                    .ok_or_else(|| LibraryError::UnknownFunction(update.name.clone()))?;
            }
        }
        Ok(FunctionLibrary {
            name: self.name.clone(),
            functions,
            library_version: self.library_version + 1,
            parent: self.parent.clone(),
        })
    }

    fn incoming(&self, update: &LibraryUpdate) -> Result<LibraryFunction, LibraryError> {
        let f = update
            .function
            .clone()
            .ok_or_else(|| LibraryError::InvalidUpdate(format!("{:?} without a function", update.action)))?;
        if f.name != update.name {
            return Err(LibraryError::InvalidUpdate(format!(
                "update names `{}` but carries `{}`",
                update.name, f.name
            )));
        }
        f.check()?;
        Ok(f)
    }

    /// Source text placed before every assembled script: a header comment
    /// followed by each function's latest body in name order.
    pub fn emit_prelude(&self) -> String {
        let mut out = format!(
            "# ---- function library `{}` version {} ({} functions) ----\n",
            self.name,
            self.library_version,
            self.functions.len()
        );
        for f in self.functions.values() {
            out.push('\n');
            out.push_str(f.body.trim_end());
            out.push_str("\n\n");
        }
        out
    }

    /// One signature line per function, used in Programmer prompts.
    pub fn signature_index(&self) -> String {
        self.functions.values().map(|f| f.signature_line() + "\n").collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_motions() -> LibraryFunction {
        LibraryFunction::from_body(
            "def chain_motions(armature, clips, start_frame=1):\n    frame = start_frame\n    for clip, length in clips:\n        assign_motion(armature, clip, frame, frame + length, None, None)\n        frame += length\n",
            "Play several motion clips back to back.",
            Provenance::AgentComposed,
        )
        .unwrap()
    }

    #[test]
    fn add_composed_function() {
        let lib = seed_library();
        let next = lib.apply_update(&LibraryUpdate::add(chain_motions(), "align motions")).unwrap();
        let f = next.get("chain_motions").unwrap();
        assert_eq!(f.version, 1);
        assert_eq!(f.provenance, Provenance::AgentComposed);
        assert_eq!(next.version(), lib.version() + 1);
        assert!(!lib.contains("chain_motions"));
    }

    #[test]
    fn replace_bumps_function_version_and_prelude_has_one_copy() {
        let lib = seed_library();
        let body = "def import_asset(path):\n    \"\"\"v2\"\"\"\n    return load_any(path)\n";
        let f = LibraryFunction::from_body(body, "Import any asset.", Provenance::AgentUpdated).unwrap();
        let next = lib.apply_update(&LibraryUpdate::replace(f, "unknown '.glb' extension")).unwrap();
        assert_eq!(next.get("import_asset").unwrap().version, 2);
        let prelude = next.emit_prelude();
        assert_eq!(prelude.matches("def import_asset(").count(), 1);
        assert!(prelude.contains("load_any(path)"));
        assert!(!lib.emit_prelude().contains("load_any"));
    }

    #[test]
    fn update_error_paths() {
        let lib = seed_library();
        assert_eq!(
            lib.apply_update(&LibraryUpdate::remove("no_such_fn", "")).unwrap_err(),
            LibraryError::UnknownFunction("no_such_fn".into())
        );
        let dup = LibraryFunction::from_body("def set_lighting(preset):\n    pass\n", "", Provenance::AgentComposed).unwrap();
        assert_eq!(
            lib.apply_update(&LibraryUpdate::add(dup.clone(), "")).unwrap_err(),
            LibraryError::NameConflict("set_lighting".into())
        );
        let bad = LibraryFunction::from_body("def other(x):\n    pass\n", "", Provenance::AgentUpdated).unwrap();
        assert!(matches!(
            lib.apply_update(&LibraryUpdate::replace(bad, "")).unwrap_err(),
            LibraryError::UnknownFunction(_)
        ));
        let mut broken = chain_motions();
        broken.body = "def chain_motions(armature, clips, start_frame=1):\n    f(\n".into();
        assert!(matches!(
            lib.apply_update(&LibraryUpdate::add(broken, "")).unwrap_err(),
            LibraryError::BodyParse(_)
        ));
    }

    #[test]
    fn remove_then_prelude_lacks_it() {
        let lib = seed_library().apply_update(&LibraryUpdate::remove("set_lighting", "unused")).unwrap();
        assert!(!lib.emit_prelude().contains("def set_lighting"));
    }

    #[test]
    fn fork_records_lineage() {
        let base = seed_library();
        let fork = base.fork("session-1");
        assert_eq!(fork.parent(), Some(&LibraryRef { name: "seed".into(), version: 1 }));
        assert_eq!(fork.version(), base.version());
    }
}
