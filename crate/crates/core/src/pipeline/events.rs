//! The session event log: one JSON object per line, sequence numbers
//! gapless from 0.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::script::AccumulatedScript;
use super::RunSettings;
use crate::agent::{AgentConfig, ChatExchange, Review};
use crate::library::{FunctionLibrary, LibraryUpdate, ScriptSnippet};
use crate::render::{AssetEntry, VideoFile, VisualArtifact};
use crate::review::FeedbackAction;
use crate::subprocess::{Decomposition, SubProcessKind, VideoDescription};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Completed,
    CompletedWithWarnings,
    Failed,
}

/// Result of one intermediate render as seen by the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RenderOutcome {
    Ok { artifact: VisualArtifact },
    /// Engine failure fed back as a Reject.
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    Decomposed {
        description: VideoDescription,
        decomposition: Decomposition,
        /// Library the session started from.
        library: FunctionLibrary,
        assets: Vec<AssetEntry>,
        settings: RunSettings,
        /// Agent settings in force, one per role.
        agents: Vec<AgentConfig>,
        exchanges: Vec<ChatExchange>,
    },
    Scripted {
        subprocess: SubProcessKind,
        iteration: u32,
        snippet: ScriptSnippet,
        capability_gap: bool,
        exchanges: Vec<ChatExchange>,
    },
    LibraryUpdated {
        subprocess: SubProcessKind,
        iteration: u32,
        updates: Vec<LibraryUpdate>,
        version_before: u64,
        version_after: u64,
        exchanges: Vec<ChatExchange>,
    },
    Rendered {
        subprocess: SubProcessKind,
        iteration: u32,
        script_sha256: String,
        #[serde(flatten)]
        outcome: RenderOutcome,
    },
    Reviewed {
        subprocess: SubProcessKind,
        iteration: u32,
        review: Review,
        action: FeedbackAction,
        exchanges: Vec<ChatExchange>,
    },
    Accepted {
        subprocess: SubProcessKind,
        iteration: u32,
        /// True when the loop ran out of iterations without a Pass.
        exhausted: bool,
        library_version: u64,
    },
    Finalized {
        script: AccumulatedScript,
        script_sha256: String,
        video: VideoFile,
        status: SessionStatus,
    },
    Failed {
        stage: String,
        error: String,
        #[serde(default)]
        exchanges: Vec<ChatExchange>,
    },
}

impl EventPayload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EventPayload::Decomposed { .. } => "decomposed",
            EventPayload::Scripted { .. } => "scripted",
            EventPayload::LibraryUpdated { .. } => "library_updated",
            EventPayload::Rendered { .. } => "rendered",
            EventPayload::Reviewed { .. } => "reviewed",
            EventPayload::Accepted { .. } => "accepted",
            EventPayload::Finalized { .. } => "finalized",
            EventPayload::Failed { .. } => "failed",
        }
    }

    pub fn exchanges(&self) -> &[ChatExchange] {
        match self {
            EventPayload::Decomposed { exchanges, .. }
            | EventPayload::Scripted { exchanges, .. }
            | EventPayload::LibraryUpdated { exchanges, .. }
            | EventPayload::Reviewed { exchanges, .. }
            | EventPayload::Failed { exchanges, .. } => exchanges,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub schema_version: u32,
    pub sequence: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log is corrupt: first missing or unreadable sequence number is {missing}")]
    Corrupt { missing: u64, detail: String },
    #[error("unsupported event schema version {0}")]
    Schema(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LogError {
    pub fn first_missing(&self) -> Option<u64> {
        match self {
            LogError::Corrupt { missing, .. } => Some(*missing),
            _ => None,
        }
    }
}

/// Parses a log, insisting on sequence numbers 0, 1, 2, ... with no
/// unreadable lines in between.
pub fn parse_events(text: &str) -> Result<Vec<SessionEvent>, LogError> {
    let mut events: Vec<SessionEvent> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let expected = events.len() as u64;
        let event: SessionEvent = serde_json::from_str(line).map_err(|e| LogError::Corrupt {
            missing: expected,
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        if event.schema_version != SCHEMA_VERSION {
            return Err(LogError::Schema(event.schema_version));
        }
        if event.sequence != expected {
            return Err(LogError::Corrupt {
                missing: expected,
                detail: format!("line {} carries sequence {}", lineno + 1, event.sequence),
            });
        }
        events.push(event);
    }
    Ok(events)
}

pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>, LogError> {
    parse_events(&fs::read_to_string(path)?)
}
