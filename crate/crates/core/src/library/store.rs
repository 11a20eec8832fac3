//! On-disk layout: `<root>/<name>/manifest.json` plus one
//! `<root>/<name>/fn/<function>.txt` body per function.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    seed_library, FunctionLibrary, LibraryError, LibraryFunction, LibraryRef, LibraryUpdate, Param, Provenance,
};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported manifest schema version {0}")]
    SchemaVersion(u32),
    #[error("body of `{function}` does not match its manifest hash")]
    HashMismatch { function: String },
    #[error("library `{0}` not found")]
    NotFound(String),
    #[error(transparent)]
    Library(#[from] LibraryError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub version: u32,
    pub provenance: Provenance,
    pub sha256: String,
    pub docstring: String,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub library_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<LibraryRef>,
    pub functions: Vec<ManifestEntry>,
}

/// Writes `lib` into `dir`, replacing whatever was there.
pub fn save_dir(dir: &Path, lib: &FunctionLibrary) -> Result<(), StoreError> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io_err(parent))?;
    let staging = tempfile::tempdir_in(parent).map_err(io_err(parent))?;
    let fn_dir = staging.path().join("fn");
    fs::create_dir(&fn_dir).map_err(io_err(&fn_dir))?;
    let mut entries = Vec::new();
    for f in lib.functions() {
        let p = fn_dir.join(format!("{}.txt", f.name));
        fs::write(&p, &f.body).map_err(io_err(&p))?;
        entries.push(ManifestEntry {
            name: f.name.clone(),
            version: f.version,
            provenance: f.provenance,
            sha256: f.body_sha256(),
            docstring: f.docstring.clone(),
            params: f.params.clone(),
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        name: lib.name().to_string(),
        library_version: lib.version(),
        parent: lib.parent().cloned(),
        functions: entries,
    };
    let mp = staging.path().join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&mp, json + "\n").map_err(io_err(&mp))?;

    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    let staged = staging.keep();
    fs::rename(&staged, dir).map_err(io_err(dir))?;
    Ok(())
}

/// Loads a library directory written by [`save_dir`], verifying body hashes.
pub fn load_dir(dir: &Path) -> Result<FunctionLibrary, StoreError> {
    let mp = dir.join("manifest.json");
    let text = match fs::read_to_string(&mp) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(StoreError::NotFound(dir.display().to_string()))
        }
        Err(e) => return Err(io_err(&mp)(e)),
    };
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| StoreError::Manifest { path: mp.clone(), source })?;
    if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(StoreError::SchemaVersion(manifest.schema_version));
    }
    let mut functions = Vec::with_capacity(manifest.functions.len());
    for e in manifest.functions {
        let p = dir.join("fn").join(format!("{}.txt", e.name));
        let body = fs::read_to_string(&p).map_err(io_err(&p))?;
        let f = LibraryFunction {
            name: e.name,
            params: e.params,
            body,
            docstring: e.docstring,
            version: e.version,
            provenance: e.provenance,
        };
        if f.body_sha256() != e.sha256 {
            return Err(StoreError::HashMismatch { function: f.name });
        }
        functions.push(f);
    }
    Ok(FunctionLibrary::from_parts(manifest.name, manifest.library_version, manifest.parent, functions)?)
}

/// A directory of named base libraries.
#[derive(Debug, Clone)]
pub struct LibraryStore {
    root: PathBuf,
}

impl LibraryStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn save(&self, lib: &FunctionLibrary) -> Result<(), StoreError> {
        save_dir(&self.path_of(lib.name()), lib)
    }

    pub fn load(&self, name: &str) -> Result<FunctionLibrary, StoreError> {
        load_dir(&self.path_of(name))
    }

    /// Loads `name`, falling back to the built-in seed when `name` is
    /// `seed` and nothing has been published under it yet.
    pub fn load_or_seed(&self, name: &str) -> Result<FunctionLibrary, StoreError> {
        match self.load(name) {
            Err(StoreError::NotFound(_)) if name == "seed" => Ok(seed_library()),
            other => other,
        }
    }

    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut names = Vec::new();
        let rd = match fs::read_dir(&self.root) {
            Ok(rd) => rd,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(names),
            Err(e) => return Err(io_err(&self.root)(e)),
        };
        for entry in rd {
            let entry = entry.map_err(io_err(&self.root))?;
            if entry.path().join("manifest.json").is_file() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        Ok(names)
    }

    /// Copies `function` from a session library into base library `base`.
    /// Re-promoting an identical body is a no-op.
    pub fn promote(
        &self,
        base: &str,
        session_lib: &FunctionLibrary,
        function: &str,
    ) -> Result<FunctionLibrary, StoreError> {
        let lib = self.load_or_seed(base)?;
        let f = session_lib
            .get(function)
            .ok_or_else(|| LibraryError::UnknownFunction(function.to_string()))?
            .clone();
        let reason = format!("promoted from session library `{}`", session_lib.name());
        let next = match lib.get(function) {
            Some(existing) if existing.body == f.body => return Ok(lib),
            Some(_) => lib.apply_update(&LibraryUpdate::replace(f, reason))?,
            None => lib.apply_update(&LibraryUpdate::add(f, reason))?,
        };
        self.save(&next)?;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip_preserves_prelude() {
        let tmp = tempfile::tempdir().unwrap();
        let store = LibraryStore::new(tmp.path());
        let lib = seed_library();
        store.save(&lib).unwrap();
        let back = store.load("seed").unwrap();
        assert_eq!(back, lib);
        assert_eq!(back.emit_prelude(), lib.emit_prelude());
        assert!(tmp.path().join("seed/fn/import_asset.txt").is_file());
        assert_eq!(store.list().unwrap(), ["seed"]);
    }

    #[test]
    fn tampered_body_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let store = LibraryStore::new(tmp.path());
        store.save(&seed_library()).unwrap();
        fs::write(tmp.path().join("seed/fn/place_object.txt"), "def place_object(obj, location):\n    pass\n").unwrap();
        assert!(matches!(store.load("seed"), Err(StoreError::HashMismatch { .. })));
    }

    #[test]
    fn promote_adds_at_version_one_and_is_idempotent() {
        let tmp = tempfile::tempdir().unwrap();
        let store = LibraryStore::new(tmp.path());
        let f = LibraryFunction::from_body(
            "def chain_motions(armature, clips):\n    pass\n",
            "Chain clips.",
            Provenance::AgentComposed,
        )
        .unwrap();
        let session = seed_library().fork("s1").apply_update(&LibraryUpdate::add(f, "")).unwrap();
        let base = store.promote("seed", &session, "chain_motions").unwrap();
        assert_eq!(base.get("chain_motions").unwrap().version, 1);
        assert_eq!(base.version(), 2);
        let again = store.promote("seed", &session, "chain_motions").unwrap();
        assert_eq!(again.version(), 2);
        assert!(matches!(
            store.promote("seed", &session, "nope"),
            Err(StoreError::Library(LibraryError::UnknownFunction(_)))
        ));
    }

    #[test]
    fn missing_library_is_not_found() {
        let tmp = tempfile::tempdir().unwrap();
        let store = LibraryStore::new(tmp.path());
        assert!(matches!(store.load("x"), Err(StoreError::NotFound(_))));
        assert_eq!(store.load_or_seed("seed").unwrap(), seed_library());
    }
}
