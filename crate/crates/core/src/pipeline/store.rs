//! On-disk session layout:
//!
//! ```text
//! <root>/<id>/events.jsonl
//!            decomposition.json
//!            snippets/<kind>-<t>.txt
//!            reviews/<kind>-<t>.json
//!            frames/<kind>-<t>/*.png
//!            final/
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::events::{read_events, EventPayload, LogError, SessionEvent, SCHEMA_VERSION};
use crate::subprocess::SubProcessKind;

pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session `{0}` already exists")]
    Exists(String),
    #[error("no session `{0}`")]
    UnknownSession(String),
    #[error("session `{0}` is locked by another process")]
    Locked(String),
    #[error("invalid session id `{0}`")]
    BadId(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Directory holding sessions.
#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    /// Creates a session directory and takes its write lock.
    pub fn create(&self, id: &str) -> Result<SessionWriter, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::BadId(id.into()));
        }
        let dir = self.dir(id);
        if dir.join(EVENTS_FILE).exists() {
            return Err(StoreError::Exists(id.into()));
        }
        for sub in ["snippets", "reviews", "frames"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(dir.join(EVENTS_FILE))?;
        file.try_lock().map_err(|_| StoreError::Locked(id.into()))?;
        Ok(SessionWriter { id: id.into(), dir, file, next: 0 })
    }

    pub fn events(&self, id: &str) -> Result<Vec<SessionEvent>, StoreError> {
        let path = self.dir(id).join(EVENTS_FILE);
        if !path.is_file() {
            return Err(StoreError::UnknownSession(id.into()));
        }
        Ok(read_events(&path)?)
    }

    /// Session ids, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(e.into()),
        };
        for e in entries {
            let e = e?;
            if e.path().join(EVENTS_FILE).is_file() {
                out.push(e.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Exclusive writer for one session. Every event is written and flushed
/// before `append` returns.
#[derive(Debug)]
pub struct SessionWriter {
    id: String,
    dir: PathBuf,
    file: File,
    next: u64,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl SessionWriter {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn events_written(&self) -> u64 {
        self.next
    }

    pub fn append(&mut self, payload: EventPayload) -> Result<SessionEvent, StoreError> {
        let event = SessionEvent { schema_version: SCHEMA_VERSION, sequence: self.next, timestamp_ms: now_ms(), payload };
        let mut line = serde_json::to_vec(&event).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.file.sync_data()?;
        tracing::debug!(session = %self.id, seq = event.sequence, kind = event.payload.kind_name(), "event");
        self.next += 1;
        Ok(event)
    }

    pub fn snippet_path(&self, kind: SubProcessKind, t: u32) -> PathBuf {
        self.dir.join("snippets").join(format!("{kind}-{t}.txt"))
    }

    pub fn review_path(&self, kind: SubProcessKind, t: u32) -> PathBuf {
        self.dir.join("reviews").join(format!("{kind}-{t}.json"))
    }

    pub fn frames_dir(&self, kind: SubProcessKind, t: u32) -> PathBuf {
        self.dir.join("frames").join(format!("{kind}-{t}"))
    }

    pub fn final_dir(&self) -> PathBuf {
        self.dir.join("final")
    }

    pub fn write_text(&self, path: &Path, text: &str) -> Result<(), StoreError> {
        fs::write(path, text)?;
        Ok(())
    }

    /// Writes `value`'s fields plus `schema_version`.
    pub fn write_json(&self, path: &Path, value: &impl Serialize) -> Result<(), StoreError> {
        let mut v = serde_json::to_value(value).map_err(std::io::Error::other)?;
        match &mut v {
            Value::Object(m) => {
                m.insert("schema_version".into(), json!(SCHEMA_VERSION));
            }
            other => {
                v = json!({"schema_version": SCHEMA_VERSION, "value": other.take()});
            }
        }
        fs::write(path, serde_json::to_vec_pretty(&v).map_err(std::io::Error::other)?)?;
        Ok(())
    }
}
