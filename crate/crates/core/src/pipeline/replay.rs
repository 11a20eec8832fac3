//! Rebuilding session state from the event log, and re-executing a session
//! with every external call answered from its recorded payload.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::events::{EventPayload, RenderOutcome, SessionEvent, SessionStatus};
use super::script::AccumulatedScript;
use super::store::SessionStore;
use super::{Engine, RunSettings};
use crate::agent::{Agent, AgentConfig, AgentRole, AgentRuntime, ChatExchange, ScriptedBackend, TemplateSet};
use crate::library::{FunctionLibrary, ScriptSnippet};
use crate::render::{
    AssembledScript, AssetCatalog, AssetEntry, FinalSettings, RenderError, Renderer, SamplingPlan, VideoFile,
    VisualArtifact,
};
use crate::review::FeedbackAction;
use crate::subprocess::{Decomposition, SubProcessKind, VideoDescription};

/// One routing decision, as logged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub subprocess: SubProcessKind,
    pub iteration: u32,
    pub action: FeedbackAction,
}

/// Session state derived purely from events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionState {
    pub description: Option<VideoDescription>,
    pub decomposition: Option<Decomposition>,
    pub settings: Option<RunSettings>,
    pub agents: Vec<AgentConfig>,
    pub assets: Vec<AssetEntry>,
    pub base_library: Option<FunctionLibrary>,
    /// Library after every logged update.
    pub library: Option<FunctionLibrary>,
    pub script: AccumulatedScript,
    pub iterations: BTreeMap<SubProcessKind, u32>,
    pub scripted: BTreeMap<SubProcessKind, u32>,
    pub reviewed: BTreeMap<SubProcessKind, u32>,
    pub actions: Vec<ActionRecord>,
    pub exhausted: Vec<SubProcessKind>,
    pub status: Option<SessionStatus>,
    pub failure: Option<String>,
    pub final_video: Option<VideoFile>,
    pub final_script_sha256: Option<String>,
    pending: Option<(SubProcessKind, ScriptSnippet)>,
}

impl SessionState {
    /// True once the session has a terminal event.
    pub fn is_finished(&self) -> bool {
        self.status.is_some()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("event {sequence}: {message}")]
pub struct ReduceError {
    pub sequence: u64,
    pub message: String,
}

/// Folds events into state, checking that they tell a coherent story.
pub fn reduce(events: &[SessionEvent]) -> Result<SessionState, ReduceError> {
    let mut s = SessionState::default();
    for ev in events {
        let err = |message: String| ReduceError { sequence: ev.sequence, message };
        if s.status.is_some() {
            return Err(err("event after the session finished".into()));
        }
        match &ev.payload {
            EventPayload::Decomposed { description, decomposition, library, assets, settings, agents, .. } => {
                if s.decomposition.is_some() {
                    return Err(err("second decomposition".into()));
                }
                s.description = Some(description.clone());
                s.decomposition = Some(decomposition.clone());
                s.settings = Some(settings.clone());
                s.agents = agents.clone();
                s.assets = assets.clone();
                s.base_library = Some(library.clone());
                s.library = Some(library.clone());
            }
            payload => {
                if s.decomposition.is_none() && !matches!(payload, EventPayload::Failed { .. }) {
                    return Err(err(format!("{} before decomposition", payload.kind_name())));
                }
                apply(&mut s, payload).map_err(err)?;
            }
        }
    }
    Ok(s)
}

fn apply(s: &mut SessionState, payload: &EventPayload) -> Result<(), String> {
    match payload {
        EventPayload::Decomposed { .. } => unreachable!("handled by reduce"),
        EventPayload::Scripted { subprocess, snippet, .. } => {
            let order = s.decomposition.as_ref().map(|d| d.items().iter().map(|i| i.kind).collect::<Vec<_>>()).unwrap_or_default();
            let pos = order.iter().position(|k| k == subprocess).ok_or("sub-process not in decomposition")?;
            if order[..pos].iter().any(|k| !s.script.contains(*k)) {
                return Err(format!("{subprocess} scripted before earlier sub-processes were accepted"));
            }
            if s.script.contains(*subprocess) {
                return Err(format!("{subprocess} scripted after acceptance"));
            }
            *s.scripted.entry(*subprocess).or_default() += 1;
            s.pending = Some((*subprocess, snippet.clone()));
        }
        EventPayload::LibraryUpdated { updates, version_before, version_after, .. } => {
            let lib = s.library.as_ref().ok_or("no library")?;
            if lib.version() != *version_before {
                return Err(format!("library at version {} but update starts from {version_before}", lib.version()));
            }
            let mut next = lib.clone();
            for u in updates {
                next = next.apply_update(u).map_err(|e| e.to_string())?;
            }
            if next.version() != *version_after {
                return Err(format!("updates reach version {} but the log says {version_after}", next.version()));
            }
            s.library = Some(next);
        }
        EventPayload::Rendered { .. } => {}
        EventPayload::Reviewed { subprocess, iteration, action, .. } => {
            *s.reviewed.entry(*subprocess).or_default() += 1;
            s.actions.push(ActionRecord { subprocess: *subprocess, iteration: *iteration, action: action.clone() });
        }
        EventPayload::Accepted { subprocess, iteration, exhausted, .. } => {
            let (kind, snippet) = s.pending.take().ok_or("acceptance without a snippet")?;
            if kind != *subprocess {
                return Err(format!("accepted {subprocess} but the last snippet was for {kind}"));
            }
            s.script = s.script.accumulate(kind, snippet).map_err(|e| e.to_string())?;
            s.iterations.insert(kind, iteration + 1);
            if *exhausted {
                s.exhausted.push(kind);
            }
        }
        EventPayload::Finalized { script, script_sha256, video, status } => {
            let mut derived = s.script.clone();
            derived.prelude_version = s.library.as_ref().map(FunctionLibrary::version).unwrap_or_default();
            if &derived != script {
                return Err("finalized script differs from the accepted snippets".into());
            }
            s.script = derived;
            s.final_script_sha256 = Some(script_sha256.clone());
            s.final_video = Some(video.clone());
            s.status = Some(*status);
        }
        EventPayload::Failed { stage, error, .. } => {
            s.failure = Some(format!("{stage}: {error}"));
            s.status = Some(SessionStatus::Failed);
        }
    }
    Ok(())
}

/// A recorded request whose replayed counterpart hashes differently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDivergence {
    pub role: AgentRole,
    /// Position among that role's calls.
    pub index: usize,
    pub recorded: String,
    pub replayed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub session_id: String,
    pub identical: bool,
    pub script_identical: bool,
    pub actions_identical: bool,
    pub recorded_script: String,
    pub replayed_script: String,
    pub recorded_actions: Vec<ActionRecord>,
    pub replayed_actions: Vec<ActionRecord>,
    pub recorded_status: Option<SessionStatus>,
    pub replayed_status: Option<SessionStatus>,
    /// Informational; a prompt may change without changing the outcome.
    pub prompt_divergences: Vec<PromptDivergence>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("session has no decomposition to replay from")]
    NotReplayable,
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error("replay setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Session(#[from] super::SessionError),
    #[error(transparent)]
    Store(#[from] super::StoreError),
}

fn role_queues(events: &[SessionEvent]) -> HashMap<AgentRole, Vec<ChatExchange>> {
    let mut q: HashMap<AgentRole, Vec<ChatExchange>> = HashMap::new();
    for ev in events {
        for ex in ev.payload.exchanges() {
            q.entry(ex.role).or_default().push(ex.clone());
        }
    }
    q
}

/// Serves recorded render outcomes keyed by output directory name.
struct RecordedRenderer {
    outcomes: Mutex<HashMap<String, RenderOutcome>>,
    video: Option<VideoFile>,
}

impl RecordedRenderer {
    fn from_events(events: &[SessionEvent]) -> Self {
        let mut outcomes = HashMap::new();
        let mut video = None;
        for ev in events {
            match &ev.payload {
                EventPayload::Rendered { subprocess, iteration, outcome, .. } => {
                    outcomes.insert(format!("{subprocess}-{iteration}"), outcome.clone());
                }
                EventPayload::Finalized { video: v, .. } => video = Some(v.clone()),
                _ => {}
            }
        }
        Self { outcomes: Mutex::new(outcomes), video }
    }
}

fn key_of(out_dir: &Path) -> String {
    out_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

impl Renderer for RecordedRenderer {
    fn id(&self) -> String {
        "recorded".into()
    }

    /// Recorded keyframes are copied into `out_dir` so the replayed review
    /// request fingerprints the same image bytes.
    fn render(&self, _script: &AssembledScript, _plan: &SamplingPlan, out_dir: &Path) -> Result<VisualArtifact, RenderError> {
        let key = key_of(out_dir);
        let outcome = self
            .outcomes
            .lock()
            .expect("recorded renderer lock")
            .remove(&key)
            .ok_or_else(|| RenderError::Manifest(format!("no recorded render for `{key}`")))?;
        match outcome {
            RenderOutcome::Error { message } => Err(RenderError::Script { message, exit_status: 1 }),
            RenderOutcome::Ok { mut artifact } => {
                fs::create_dir_all(out_dir)?;
                for k in &mut artifact.keyframes {
                    let dest = out_dir.join(k.file_name().unwrap_or_default());
                    match fs::copy(&*k, &dest) {
                        Ok(_) => {}
                        Err(_) => fs::write(&dest, b"")?,
                    }
                    *k = dest;
                }
                Ok(artifact)
            }
        }
    }

    fn render_final(&self, _script: &AssembledScript, _settings: &FinalSettings, out_dir: &Path) -> Result<VideoFile, RenderError> {
        let video = self.video.clone().ok_or_else(|| RenderError::Manifest("no recorded final render".into()))?;
        fs::create_dir_all(out_dir)?;
        Ok(video)
    }
}

/// Re-runs a logged session with recorded agent replies and render
/// outcomes, in a scratch store, and compares the results.
pub fn replay(session_id: &str, events: &[SessionEvent], templates: TemplateSet) -> Result<ReplayReport, ReplayError> {
    let recorded = reduce(events)?;
    let (Some(description), Some(library), Some(settings)) =
        (recorded.description.clone(), recorded.base_library.clone(), recorded.settings.clone())
    else {
        return Err(ReplayError::NotReplayable);
    };

    let queues = role_queues(events);
    let mut backends: HashMap<AgentRole, Arc<ScriptedBackend>> = HashMap::new();
    let mut configs = HashMap::new();
    for role in AgentRole::ALL {
        let recorded_calls = queues.get(&role).cloned().unwrap_or_default();
        let cfg = recorded
            .agents
            .iter()
            .find(|c| c.role == role)
            .cloned()
            .unwrap_or_else(|| AgentConfig::for_role(role));
        configs.insert(role, cfg);
        backends.insert(role, Arc::new(ScriptedBackend::new(recorded_calls.into_iter().map(|e| e.response))));
    }
    let agent = |role: AgentRole| Agent::new(configs[&role].clone(), backends[&role].clone());
    let runtime = AgentRuntime::new(agent(AgentRole::Director), agent(AgentRole::Programmer), agent(AgentRole::Reviewer), templates)
        .map_err(|e| ReplayError::Setup(e.to_string()))?;
    let engine = Engine::new(
        runtime,
        Arc::new(RecordedRenderer::from_events(events)),
        AssetCatalog::from_recorded(&recorded.assets),
        library,
        settings,
    );

    let scratch = tempfile::tempdir().map_err(|e| ReplayError::Setup(e.to_string()))?;
    let store = SessionStore::new(scratch.path());
    engine.run_session_as(&description, &store, session_id)?;
    let replayed_events = store.events(session_id)?;
    let replayed = reduce(&replayed_events)?;

    let mut prompt_divergences = Vec::new();
    let replayed_queues = role_queues(&replayed_events);
    for role in AgentRole::ALL {
        let a = queues.get(&role).map(Vec::as_slice).unwrap_or_default();
        let b = replayed_queues.get(&role).map(Vec::as_slice).unwrap_or_default();
        for (i, ex) in a.iter().enumerate() {
            let other = b.get(i).map(|e| e.request_hash.clone());
            if other.as_deref() != Some(ex.request_hash.as_str()) {
                prompt_divergences.push(PromptDivergence { role, index: i, recorded: ex.request_hash.clone(), replayed: other });
            }
        }
    }

    let script_identical = recorded.script == replayed.script && recorded.script.to_text() == replayed.script.to_text();
    let actions_identical = recorded.actions == replayed.actions;
    Ok(ReplayReport {
        session_id: session_id.to_string(),
        identical: script_identical && actions_identical && recorded.status == replayed.status,
        script_identical,
        actions_identical,
        recorded_script: recorded.script.to_text(),
        replayed_script: replayed.script.to_text(),
        recorded_actions: recorded.actions,
        replayed_actions: replayed.actions,
        recorded_status: recorded.status,
        replayed_status: replayed.status,
        prompt_divergences,
    })
}
