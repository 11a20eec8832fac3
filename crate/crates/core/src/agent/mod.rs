//! The Director, Programmer and Reviewer roles.
//!
//! Every operation renders a prompt template, calls the role's backend,
//! and parses the reply. A reply that cannot be used triggers a corrective
//! re-prompt (the original conversation, the bad answer and a description
//! of the problem) while the role's `parse_retries` budget lasts. Each call
//! is appended to a caller-owned exchange log, including failed attempts.

pub mod backend;
pub mod extract;
pub mod mock;
pub mod prompts;
pub mod review;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use backend::{
    BackendError, ChatBackend, ChatMessage, ChatRequest, ChatResponse, ContentPart, FixtureBackend,
    FnBackend, HttpChatBackend, MessageRole, RetryPolicy, ScriptedBackend, Usage,
};
pub use prompts::{TemplateError, TemplateSet};
pub use review::{parse_review, QuestionAnswer, Review, ReviewDraft, TargetHint, Verdict};

use crate::library::{
    validate_snippet, FunctionLibrary, LibraryFunction, LibraryUpdate, Provenance, ScriptSnippet, UpdateAction,
    ValidationReport,
};
use crate::rag::{format_context, RagError, RagStore};
use crate::render::VisualArtifact;
use crate::subprocess::{Decomposition, SubProcessKind, SubProcessSpec, VideoDescription};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Director,
    Programmer,
    Reviewer,
}

impl AgentRole {
    pub const ALL: [AgentRole; 3] = [AgentRole::Director, AgentRole::Programmer, AgentRole::Reviewer];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Director => "director",
            AgentRole::Programmer => "programmer",
            AgentRole::Reviewer => "reviewer",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentRole::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown agent role `{s}`"))
    }
}

/// Which operation a chat call served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Direct,
    Program,
    UpdateLibrary,
    Review,
}

/// One request/response pair as recorded in the session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub role: AgentRole,
    pub purpose: Purpose,
    pub request: ChatRequest,
    pub request_hash: String,
    pub response: String,
    #[serde(default)]
    pub usage: Option<Usage>,
    pub latency_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub role: AgentRole,
    pub backend_ref: String,
    pub model_id: String,
    pub temperature: f64,
    pub prompt_template_ref: String,
    pub rag_top_k: usize,
    pub parse_retries: u32,
}

impl AgentConfig {
    pub fn for_role(role: AgentRole) -> Self {
        Self {
            role,
            backend_ref: "mock".into(),
            model_id: "mock".into(),
            temperature: if role == AgentRole::Reviewer { 0.0 } else { 0.2 },
            prompt_template_ref: role.as_str().into(),
            rag_top_k: crate::rag::DEFAULT_TOP_K,
            parse_retries: 2,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("{} temperature {} is outside [0, 2]", self.role, self.temperature));
        }
        if self.model_id.trim().is_empty() {
            return Err(format!("{} has no model id", self.role));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub backend: Arc<dyn ChatBackend>,
}

impl Agent {
    pub fn new(config: AgentConfig, backend: Arc<dyn ChatBackend>) -> Self {
        Self { config, backend }
    }
}

impl fmt::Debug for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Agent").field("config", &self.config).field("backend", &self.backend.id()).finish()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("{role} reply unusable after {attempts} attempt(s): {last_error}")]
    Protocol { role: AgentRole, attempts: u32, last_error: String },
    #[error("snippet failed validation after {attempts} attempt(s): {}", report.describe())]
    Validation { attempts: u32, report: ValidationReport },
    #[error("{role} backend: {source}")]
    Backend {
        role: AgentRole,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Rag(#[from] RagError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("agent configuration: {0}")]
    Config(String),
}

enum Rejection {
    Protocol(String),
    Validation(ValidationReport),
}

impl Rejection {
    fn message(&self) -> String {
        match self {
            Rejection::Protocol(m) => m.clone(),
            Rejection::Validation(r) => r.describe(),
        }
    }
}

impl From<String> for Rejection {
    fn from(s: String) -> Self {
        Rejection::Protocol(s)
    }
}

/// Programmer output for one attempt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramOutput {
    pub snippet: ScriptSnippet,
    /// The Programmer could not express the fix with existing functions.
    pub capability_gap: bool,
    #[serde(default)]
    pub notes: Option<String>,
}

/// Inputs to [`AgentRuntime::program`].
#[derive(Debug, Clone, Copy)]
pub struct ProgramInput<'a> {
    pub spec: &'a SubProcessSpec,
    pub library: &'a FunctionLibrary,
    pub feedback: Option<&'a Review>,
    pub previous: Option<&'a ScriptSnippet>,
    pub assets: &'a str,
    pub iteration: u32,
}

/// Inputs to [`AgentRuntime::review`].
#[derive(Debug, Clone, Copy)]
pub struct ReviewInput<'a> {
    pub spec: &'a SubProcessSpec,
    pub artifact: &'a VisualArtifact,
    pub checklist: &'a [String],
    pub coordinates: &'a str,
    pub iteration: u32,
}

pub const CORRECTIVE_PREFIX: &str = "Your previous reply could not be used:";

fn corrective(message: &str) -> String {
    format!("{CORRECTIVE_PREFIX} {message}\nReply again, following the required format exactly.")
}

/// Parses a Director reply into a validated decomposition.
pub fn parse_decomposition(raw: &str, description: &VideoDescription) -> Result<Decomposition, String> {
    #[derive(Deserialize)]
    struct Item {
        kind: String,
        guidance: String,
        #[serde(default)]
        motions: Vec<String>,
        #[serde(default)]
        camera_moves: bool,
    }
    let value = last_json(raw)?;
    let list = match &value {
        Value::Array(_) => value.clone(),
        Value::Object(o) => o.get("subprocesses").cloned().ok_or("JSON block lacks a `subprocesses` list")?,
        _ => unreachable!("extractor only yields objects and arrays"),
    };
    let items: Vec<Item> = serde_json::from_value(list).map_err(|e| format!("malformed `subprocesses`: {e}"))?;
    let specs = items
        .into_iter()
        .map(|i| {
            let kind = SubProcessKind::from_str(&i.kind).map_err(|e| e.to_string())?;
            Ok(SubProcessSpec::new(kind, i.guidance).with_motions(i.motions).with_camera_moves(i.camera_moves))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Decomposition::new(specs, &description.id, &description.text).map_err(|e| e.to_string())
}

fn last_json(raw: &str) -> Result<Value, String> {
    if raw.trim().is_empty() {
        return Err("empty reply".into());
    }
    extract::last_json_block(raw).ok_or_else(|| "no JSON block found".into())
}

/// Snippet source and flags from a Programmer reply: a JSON block with a
/// `snippet` string, or a fenced python block (flags may then come from a
/// separate JSON block).
pub fn parse_program(raw: &str) -> Result<(String, bool, Option<String>), String> {
    if raw.trim().is_empty() {
        return Err("empty reply".into());
    }
    let json = extract::last_json_block(raw);
    let flag = |v: &Value| v.get("capability_gap").and_then(Value::as_bool).unwrap_or(false);
    let notes = |v: &Value| v.get("notes").and_then(Value::as_str).map(str::to_string);
    if let Some(v) = &json {
        if let Some(s) = v.get("snippet") {
            let src = s.as_str().ok_or("`snippet` must be a string")?;
            return Ok((src.to_string(), flag(v), notes(v)));
        }
    }
    let code = extract::last_code_block(raw).ok_or("no snippet found; return a JSON block with a `snippet` field")?;
    Ok((code, json.as_ref().is_some_and(flag), json.as_ref().and_then(notes)))
}

/// Library updates from a Programmer reply, checked by applying them in
/// order to `lib`.
pub fn parse_library_updates(raw: &str, lib: &FunctionLibrary, default_reason: &str) -> Result<Vec<LibraryUpdate>, String> {
    #[derive(Deserialize)]
    struct Item {
        action: UpdateAction,
        name: String,
        #[serde(default)]
        body: Option<String>,
        #[serde(default)]
        docstring: String,
        #[serde(default)]
        reason: String,
    }
    let value = last_json(raw)?;
    let list = value.get("updates").cloned().ok_or("JSON block lacks an `updates` list")?;
    let items: Vec<Item> = serde_json::from_value(list).map_err(|e| format!("malformed `updates`: {e}"))?;
    if items.is_empty() {
        return Err("`updates` is empty".into());
    }
    let mut scratch = lib.clone();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let reason = if item.reason.trim().is_empty() { default_reason.to_string() } else { item.reason };
        let update = match item.action {
            UpdateAction::Remove => LibraryUpdate::remove(&item.name, reason),
            action => {
                let body = item.body.ok_or(format!("update for `{}` has no body", item.name))?;
                let prov = if action == UpdateAction::Add { Provenance::AgentComposed } else { Provenance::AgentUpdated };
                let f = LibraryFunction::from_body(body, item.docstring, prov).map_err(|e| e.to_string())?;
                if f.name != item.name {
                    return Err(format!("body defines `{}` but the update names `{}`", f.name, item.name));
                }
                if action == UpdateAction::Add {
                    LibraryUpdate::add(f, reason)
                } else {
                    LibraryUpdate::replace(f, reason)
                }
            }
        };
        scratch = scratch.apply_update(&update).map_err(|e| e.to_string())?;
        out.push(update);
    }
    Ok(out)
}

pub struct AgentRuntime {
    director: Agent,
    programmer: Agent,
    reviewer: Agent,
    templates: TemplateSet,
    rag: Option<Arc<RagStore>>,
    rag_budget_chars: usize,
}

impl fmt::Debug for AgentRuntime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentRuntime")
            .field("director", &self.director)
            .field("programmer", &self.programmer)
            .field("reviewer", &self.reviewer)
            .field("rag", &self.rag.is_some())
            .finish()
    }
}

pub const DEFAULT_RAG_BUDGET_CHARS: usize = 6_000;

impl AgentRuntime {
    pub fn new(director: Agent, programmer: Agent, reviewer: Agent, templates: TemplateSet) -> Result<Self, AgentError> {
        for (agent, role) in [(&director, AgentRole::Director), (&programmer, AgentRole::Programmer), (&reviewer, AgentRole::Reviewer)] {
            if agent.config.role != role {
                return Err(AgentError::Config(format!("agent configured as {} used as {role}", agent.config.role)));
            }
            agent.config.validate().map_err(AgentError::Config)?;
            templates.get(&agent.config.prompt_template_ref)?;
        }
        if !reviewer.backend.supports_images() {
            return Err(AgentError::Config(format!(
                "reviewer backend `{}` does not accept images",
                reviewer.backend.id()
            )));
        }
        Ok(Self { director, programmer, reviewer, templates, rag: None, rag_budget_chars: DEFAULT_RAG_BUDGET_CHARS })
    }

    pub fn with_rag(mut self, store: Arc<RagStore>, budget_chars: usize) -> Self {
        self.rag = Some(store);
        self.rag_budget_chars = budget_chars;
        self
    }

    pub fn agent(&self, role: AgentRole) -> &Agent {
        match role {
            AgentRole::Director => &self.director,
            AgentRole::Programmer => &self.programmer,
            AgentRole::Reviewer => &self.reviewer,
        }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    fn context(&self, agent: &Agent, query: &str) -> Result<String, AgentError> {
        match &self.rag {
            Some(store) if agent.config.rag_top_k > 0 && !store.is_empty() => {
                let hits = store.retrieve(query, agent.config.rag_top_k)?;
                Ok(format_context(&hits, self.rag_budget_chars))
            }
            _ => Ok(String::new()),
        }
    }

    /// Runs the request/parse/correct loop for one operation.
    fn converse<T>(
        &self,
        agent: &Agent,
        purpose: Purpose,
        first: ChatMessage,
        log: &mut Vec<ChatExchange>,
        parse: impl Fn(&str) -> Result<T, Rejection>,
    ) -> Result<T, AgentError> {
        let role = agent.config.role;
        let mut messages = vec![first];
        let budget = agent.config.parse_retries + 1;
        let mut last = None;
        for attempt in 1..=budget {
            let request = ChatRequest {
                model: agent.config.model_id.clone(),
                temperature: agent.config.temperature,
                messages: messages.clone(),
            };
            let (result, latency_ms) = backend::timed(|| agent.backend.complete(&request));
            let response = result.map_err(|source| AgentError::Backend { role, source })?;
            log.push(ChatExchange {
                role,
                purpose,
                request_hash: request.hash(),
                request,
                response: response.text.clone(),
                usage: response.usage,
                latency_ms,
                attempts: response.attempts,
            });
            match parse(&response.text) {
                Ok(v) => return Ok(v),
                Err(rej) => {
                    tracing::warn!(%role, attempt, error = %rej.message(), "unusable agent reply");
                    if attempt < budget {
                        messages.push(ChatMessage::assistant(response.text));
                        messages.push(ChatMessage::user(corrective(&rej.message())));
                    }
                    last = Some(rej);
                }
            }
        }
        Err(match last.expect("at least one attempt") {
            Rejection::Validation(report) => AgentError::Validation { attempts: budget, report },
            Rejection::Protocol(last_error) => AgentError::Protocol { role, attempts: budget, last_error },
        })
    }

    /// Splits a description into the five sub-processes.
    pub fn direct(&self, q: &VideoDescription, log: &mut Vec<ChatExchange>) -> Result<Decomposition, AgentError> {
        if q.text.trim().is_empty() {
            return Err(AgentError::Precondition("empty video description".into()));
        }
        let agent = &self.director;
        let vars = BTreeMap::from([("description", q.text.clone()), ("retrieved_context", self.context(agent, &q.text)?)]);
        let prompt = self.templates.render(&agent.config.prompt_template_ref, &vars)?;
        self.converse(agent, Purpose::Direct, ChatMessage::user(prompt), log, |raw| {
            parse_decomposition(raw, q).map_err(Rejection::from)
        })
    }

    /// Writes (or refines) the snippet for one sub-process. The returned
    /// snippet always passes [`validate_snippet`] against `input.library`.
    pub fn program(&self, input: ProgramInput<'_>, log: &mut Vec<ChatExchange>) -> Result<ProgramOutput, AgentError> {
        if input.library.is_empty() {
            return Err(AgentError::Precondition("function library is empty".into()));
        }
        if input.feedback.is_some_and(Review::is_pass) {
            return Err(AgentError::Precondition("feedback must be a Reject review".into()));
        }
        let agent = &self.programmer;
        let spec = input.spec;
        let vars = BTreeMap::from([
            ("kind", spec.kind.to_string()),
            ("guidance", spec.guidance.clone()),
            ("library_index", input.library.signature_index()),
            ("assets", input.assets.to_string()),
            ("previous_snippet", input.previous.map(|s| s.source.clone()).unwrap_or_else(|| "(none)".into())),
            ("feedback", input.feedback.map(Review::feedback_text).unwrap_or_else(|| "(none)".into())),
            ("retrieved_context", self.context(agent, &format!("{} {}", AgentRole::Programmer, spec.guidance))?),
        ]);
        let prompt = self.templates.render(&agent.config.prompt_template_ref, &vars)?;
        self.converse(agent, Purpose::Program, ChatMessage::user(prompt), log, |raw| {
            let (src, capability_gap, notes) = parse_program(raw)?;
            let snippet = ScriptSnippet::new(spec.kind, src, input.iteration, input.library.version())
                .map_err(|e| format!("snippet does not parse (line {}): {}", e.line, e.message))?;
            let report = validate_snippet(&snippet, input.library);
            if !report.is_ok() {
                return Err(Rejection::Validation(report));
            }
            Ok(ProgramOutput { snippet, capability_gap, notes })
        })
    }

    /// Asks the Programmer for library changes that address `feedback`.
    /// The updates are checked against `lib` but not applied.
    pub fn update_library(
        &self,
        spec: &SubProcessSpec,
        lib: &FunctionLibrary,
        snippet: &ScriptSnippet,
        feedback: &Review,
        log: &mut Vec<ChatExchange>,
    ) -> Result<Vec<LibraryUpdate>, AgentError> {
        let agent = &self.programmer;
        let vars = BTreeMap::from([
            ("kind", spec.kind.to_string()),
            ("guidance", spec.guidance.clone()),
            ("library_index", lib.signature_index()),
            ("library_source", lib.emit_prelude()),
            ("snippet", snippet.source.clone()),
            ("feedback", feedback.feedback_text()),
            ("retrieved_context", self.context(agent, &format!("{} {}", AgentRole::Programmer, spec.guidance))?),
        ]);
        let prompt = self.templates.render(prompts::LIBRARY_UPDATE, &vars)?;
        let default_reason = feedback
            .render_error
            .clone()
            .or_else(|| feedback.suggestions.first().cloned())
            .unwrap_or_else(|| "reviewer rejected the result".into());
        self.converse(agent, Purpose::UpdateLibrary, ChatMessage::user(prompt), log, |raw| {
            parse_library_updates(raw, lib, &default_reason).map_err(Rejection::from)
        })
    }

    /// Judges rendered keyframes. Images travel as attachments.
    pub fn review(&self, input: ReviewInput<'_>, log: &mut Vec<ChatExchange>) -> Result<Review, AgentError> {
        let artifact = input.artifact;
        if artifact.keyframes.is_empty() {
            return Err(AgentError::Precondition("artifact has no keyframes".into()));
        }
        if input.spec.kind == SubProcessKind::Motion && artifact.coordinates.is_empty() {
            return Err(AgentError::Precondition("motion artifact has no coordinate samples".into()));
        }
        let agent = &self.reviewer;
        let checklist = input.checklist.iter().enumerate().map(|(i, q)| format!("{}. {q}", i + 1)).collect::<Vec<_>>().join("\n");
        let coordinates = if input.coordinates.trim().is_empty() { "(not sampled)".to_string() } else { input.coordinates.to_string() };
        let vars = BTreeMap::from([
            ("kind", input.spec.kind.to_string()),
            ("guidance", input.spec.guidance.clone()),
            ("checklist", checklist),
            ("coordinates", coordinates),
            ("retrieved_context", self.context(agent, &format!("{} {}", AgentRole::Reviewer, input.spec.guidance))?),
        ]);
        let prompt = self.templates.render(&agent.config.prompt_template_ref, &vars)?;
        let mut content = vec![ContentPart::text(prompt)];
        for k in &artifact.keyframes {
            content.push(
                ContentPart::image(k)
                    .map_err(|e| AgentError::Precondition(format!("keyframe {} unreadable: {e}", k.display())))?,
            );
        }
        let first = ChatMessage { role: MessageRole::User, content };
        let iteration = input.iteration;
        self.converse(agent, Purpose::Review, first, log, |raw| parse_review(raw).map(|d| d.at(iteration)).map_err(Rejection::from))
    }
}
