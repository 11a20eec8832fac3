//! Session orchestration: decomposition, the per-sub-process review loop,
//! final assembly, and the event log that records all of it.

pub mod config;
mod engine;
pub mod events;
pub mod replay;
pub mod script;
pub mod store;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use config::{ConfigError, SessionConfig};
pub use engine::Engine;
pub use events::{parse_events, read_events, EventPayload, LogError, RenderOutcome, SessionEvent, SessionStatus, SCHEMA_VERSION};
pub use replay::{reduce, replay, ActionRecord, PromptDivergence, ReduceError, ReplayError, ReplayReport, SessionState};
pub use script::{AccumulatedScript, DuplicateSubprocess};
pub use store::{SessionStore, SessionWriter, StoreError, EVENTS_FILE};

use crate::library::FunctionLibrary;
use crate::render::{FinalSettings, VideoFile};
use crate::review::SamplingConfig;
use crate::subprocess::{EmptyDescription, SubProcessKind};

/// Default review-loop cap.
pub const DEFAULT_MAX_REVIEW_ITERATIONS: u32 = 15;

/// Knobs that shape a run and are recorded with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub max_review_iterations: u32,
    pub sampling: SamplingConfig,
    pub final_settings: FinalSettings,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            max_review_iterations: DEFAULT_MAX_REVIEW_ITERATIONS,
            sampling: SamplingConfig::default(),
            final_settings: FinalSettings::default(),
        }
    }
}

/// Where a failed session stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFailure {
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub session_id: String,
    pub dir: PathBuf,
    pub final_script: AccumulatedScript,
    pub final_video: Option<VideoFile>,
    /// Iterations used per sub-process, in decomposition order.
    pub per_subprocess_iterations: Vec<(SubProcessKind, u32)>,
    pub status: SessionStatus,
    /// Library in force at the end of the session.
    pub library: FunctionLibrary,
    pub failure: Option<SessionFailure>,
}

impl SessionResult {
    pub fn iterations(&self) -> BTreeMap<SubProcessKind, u32> {
        self.per_subprocess_iterations.iter().copied().collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    EmptyDescription(#[from] EmptyDescription),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}
