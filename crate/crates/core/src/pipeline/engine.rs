use std::sync::Arc;

use serde_json::json;

use super::events::{EventPayload, RenderOutcome, SessionStatus};
use super::script::AccumulatedScript;
use super::store::{SessionStore, SessionWriter, StoreError};
use super::{RunSettings, SessionError, SessionFailure, SessionResult};
use crate::agent::{AgentRole, AgentRuntime, ChatExchange, ProgramInput, Review};
use crate::library::{FunctionLibrary, ScriptSnippet};
use crate::render::{assemble, AssetCatalog, RenderError, Renderer};
use crate::review::{build_sampling_plan, evaluate, hint_for_render_error, route_feedback, EvaluateError, FeedbackAction};
use crate::subprocess::{SubProcessKind, SubProcessSpec, VideoDescription};

/// Everything a session needs. Shareable across threads; each session
/// works on its own copy of the library.
pub struct Engine {
    pub runtime: AgentRuntime,
    pub renderer: Arc<dyn Renderer>,
    pub catalog: AssetCatalog,
    pub library: FunctionLibrary,
    pub settings: RunSettings,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("runtime", &self.runtime)
            .field("renderer", &self.renderer.id())
            .field("assets", &self.catalog.len())
            .field("library", &self.library.name())
            .field("settings", &self.settings)
            .finish()
    }
}

/// Why a session stopped early.
enum Halt {
    Failed { stage: String, error: String, exchanges: Vec<ChatExchange> },
    Store(StoreError),
}

impl From<StoreError> for Halt {
    fn from(e: StoreError) -> Self {
        Halt::Store(e)
    }
}

fn fail(stage: impl Into<String>, error: impl ToString, exchanges: Vec<ChatExchange>) -> Halt {
    Halt::Failed { stage: stage.into(), error: error.to_string(), exchanges }
}

/// Mutable state of one running session.
struct Run<'e> {
    engine: &'e Engine,
    writer: SessionWriter,
    library: FunctionLibrary,
    script: AccumulatedScript,
    iterations: Vec<(SubProcessKind, u32)>,
    exhausted: bool,
}

impl Engine {
    pub fn new(
        runtime: AgentRuntime,
        renderer: Arc<dyn Renderer>,
        catalog: AssetCatalog,
        library: FunctionLibrary,
        settings: RunSettings,
    ) -> Self {
        Self { runtime, renderer, catalog, library, settings }
    }

    /// Runs a whole session under a fresh id.
    pub fn run_session(&self, description: &str, store: &SessionStore) -> Result<SessionResult, SessionError> {
        let q = VideoDescription::new(description)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.run_session_as(&q, store, &id)
    }

    /// Runs a session under `session_id`. Agent and render failures end in
    /// a `Failed` event and a result with status Failed; only storage
    /// problems surface as errors.
    pub fn run_session_as(
        &self,
        q: &VideoDescription,
        store: &SessionStore,
        session_id: &str,
    ) -> Result<SessionResult, SessionError> {
        if q.text.trim().is_empty() {
            return Err(crate::subprocess::EmptyDescription.into());
        }
        if self.settings.max_review_iterations == 0 {
            return Err(SessionError::Settings("max_review_iterations must be at least 1".into()));
        }
        let writer = store.create(session_id)?;
        let mut run = Run {
            engine: self,
            writer,
            library: self.library.clone(),
            script: AccumulatedScript::new(),
            iterations: Vec::new(),
            exhausted: false,
        };
        tracing::info!(session = session_id, "session started");
        let outcome = run.execute(q);
        let (status, video, failure) = match outcome {
            Ok((status, video)) => (status, Some(video), None),
            Err(Halt::Store(e)) => return Err(e.into()),
            Err(Halt::Failed { stage, error, exchanges }) => {
                tracing::error!(session = session_id, %stage, %error, "session failed");
                run.writer.append(EventPayload::Failed { stage: stage.clone(), error: error.clone(), exchanges })?;
                (SessionStatus::Failed, None, Some(SessionFailure { stage, error }))
            }
        };
        Ok(SessionResult {
            session_id: session_id.to_string(),
            dir: run.writer.dir().to_path_buf(),
            final_script: run.script,
            final_video: video,
            per_subprocess_iterations: run.iterations,
            status,
            library: run.library,
            failure,
        })
    }
}

impl Run<'_> {
    fn execute(&mut self, q: &VideoDescription) -> Result<(SessionStatus, crate::render::VideoFile), Halt> {
        let engine = self.engine;
        let mut exchanges = Vec::new();
        let decomposition = match engine.runtime.direct(q, &mut exchanges) {
            Ok(d) => d,
            Err(e) => return Err(fail("decompose", e, exchanges)),
        };
        if decomposition.has_character_and_camera_motion() {
            tracing::warn!("description asks for both character and camera motion; results tend to be weaker");
        }
        self.writer.write_json(&self.writer.dir().join("decomposition.json"), &decomposition)?;
        self.writer.append(EventPayload::Decomposed {
            description: q.clone(),
            decomposition: decomposition.clone(),
            library: self.library.clone(),
            assets: engine.catalog.entries().cloned().collect(),
            settings: engine.settings.clone(),
            agents: AgentRole::ALL.iter().map(|r| engine.runtime.agent(*r).config.clone()).collect(),
            exchanges,
        })?;

        for spec in decomposition.items() {
            self.execute_subprocess(spec)?;
        }

        let mut script = self.script.clone();
        script.prelude_version = self.library.version();
        let assembled = assemble(&self.library.emit_prelude(), &script.sources(), &engine.catalog)
            .map_err(|e| fail("finalize", e, vec![]))?;
        let final_dir = self.writer.final_dir();
        let video = engine
            .renderer
            .render_final(&assembled, &engine.settings.final_settings, &final_dir)
            .map_err(|e| fail("finalize", e, vec![]))?;
        let script_path = final_dir.join("script.py");
        if !script_path.exists() {
            self.writer.write_text(&script_path, &assembled.text)?;
        }
        let status = if self.exhausted { SessionStatus::CompletedWithWarnings } else { SessionStatus::Completed };
        self.script = script.clone();
        self.writer.append(EventPayload::Finalized {
            script,
            script_sha256: assembled.sha256(),
            video: video.clone(),
            status,
        })?;
        tracing::info!(session = self.writer.id(), ?status, "session finished");
        Ok((status, video))
    }

    /// The review loop for one sub-process. At least one iteration runs;
    /// another follows while the verdict is Reject and fewer than the
    /// configured maximum have run. When the cap is hit the last snippet
    /// is accepted with a warning.
    ///
    /// Originally stated as `while r and t < n_max` with `r` starting
    /// unset, which never enters the body.
    fn execute_subprocess(&mut self, spec: &SubProcessSpec) -> Result<(), Halt> {
        let engine = self.engine;
        let kind = spec.kind;
        let n_max = engine.settings.max_review_iterations;
        let plan = build_sampling_plan(spec, &engine.settings.sampling);
        let assets = engine.catalog.prompt_listing();
        let stage = |what: &str| format!("{kind}/{what}");

        let mut t: u32 = 0;
        let mut feedback: Option<Review> = None;
        let mut previous: Option<ScriptSnippet> = None;
        let mut action: Option<FeedbackAction> = None;
        loop {
            if let (Some(FeedbackAction::UpdateLibrary { .. }), Some(prev), Some(review)) = (&action, &previous, &feedback) {
                let mut ex = Vec::new();
                let updates = engine
                    .runtime
                    .update_library(spec, &self.library, prev, review, &mut ex)
                    .map_err(|e| fail(stage("update_library"), e, ex.clone()))?;
                let before = self.library.version();
                let mut lib = self.library.clone();
                for u in &updates {
                    lib = lib.apply_update(u).map_err(|e| fail(stage("update_library"), e, ex.clone()))?;
                }
                self.library = lib;
                self.writer.append(EventPayload::LibraryUpdated {
                    subprocess: kind,
                    iteration: t,
                    updates,
                    version_before: before,
                    version_after: self.library.version(),
                    exchanges: ex,
                })?;
            }

            let mut ex = Vec::new();
            let input = ProgramInput {
                spec,
                library: &self.library,
                feedback: feedback.as_ref(),
                previous: previous.as_ref(),
                assets: &assets,
                iteration: t,
            };
            let out = engine.runtime.program(input, &mut ex).map_err(|e| fail(stage("program"), e, ex.clone()))?;
            self.writer.write_text(&self.writer.snippet_path(kind, t), &out.snippet.source)?;
            self.writer.append(EventPayload::Scripted {
                subprocess: kind,
                iteration: t,
                snippet: out.snippet.clone(),
                capability_gap: out.capability_gap,
                exchanges: ex,
            })?;

            let mut sources = self.script.sources();
            sources.push((kind, out.snippet.source.as_str()));
            let rendered = match assemble(&self.library.emit_prelude(), &sources, &engine.catalog) {
                Ok(script) => {
                    let sha = script.sha256();
                    (sha, engine.renderer.render(&script, &plan, &self.writer.frames_dir(kind, t)))
                }
                Err(e) => (String::new(), Err(RenderError::Script { message: e.to_string(), exit_status: -1 })),
            };
            let (script_sha256, result) = rendered;
            let mut ex = Vec::new();
            let review = match result {
                Ok(artifact) => {
                    self.writer.append(EventPayload::Rendered {
                        subprocess: kind,
                        iteration: t,
                        script_sha256,
                        outcome: RenderOutcome::Ok { artifact: artifact.clone() },
                    })?;
                    match evaluate(&engine.runtime, spec, &plan, &artifact, &engine.settings.sampling, t, &mut ex) {
                        Ok(r) => r,
                        Err(EvaluateError::Contract(m)) => return Err(fail(stage("review"), m, ex)),
                        Err(EvaluateError::Agent(e)) => return Err(fail(stage("review"), e, ex)),
                    }
                }
                Err(e @ (RenderError::Script { .. } | RenderError::Timeout { .. })) => {
                    let message = match e {
                        RenderError::Script { message, .. } => message,
                        other => other.to_string(),
                    };
                    tracing::warn!(%kind, iteration = t, "render failed; feeding the error back as a rejection");
                    self.writer.append(EventPayload::Rendered {
                        subprocess: kind,
                        iteration: t,
                        script_sha256,
                        outcome: RenderOutcome::Error { message: message.clone() },
                    })?;
                    Review::from_render_error(&message, hint_for_render_error(&message, &self.library), t)
                }
                Err(e) => return Err(fail(stage("render"), e, vec![])),
            };

            let routed = route_feedback(&review, out.capability_gap);
            self.writer.write_json(&self.writer.review_path(kind, t), &json!({"review": review, "action": routed}))?;
            self.writer.append(EventPayload::Reviewed {
                subprocess: kind,
                iteration: t,
                review: review.clone(),
                action: routed.clone(),
                exchanges: ex,
            })?;

            t += 1;
            if review.is_pass() || t >= n_max {
                let exhausted = !review.is_pass();
                if exhausted {
                    tracing::warn!(%kind, iterations = t, "review limit reached; keeping the last snippet");
                    self.exhausted = true;
                }
                self.script = self
                    .script
                    .accumulate(kind, out.snippet)
                    .map_err(|e| fail(stage("accumulate"), e, vec![]))?;
                self.iterations.push((kind, t));
                self.writer.append(EventPayload::Accepted {
                    subprocess: kind,
                    iteration: t - 1,
                    exhausted,
                    library_version: self.library.version(),
                })?;
                return Ok(());
            }
            feedback = Some(review);
            previous = Some(out.snippet);
            action = Some(routed);
        }
    }
}
