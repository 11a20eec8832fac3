#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use clapper_core::agent::mock::{MockDirector, MockProgrammer, MockReviewer, ReviewerPolicy};
use clapper_core::agent::{
    Agent, AgentConfig, AgentRole, AgentRuntime, BackendError, ChatBackend, ChatRequest, ChatResponse, TemplateSet,
};
use clapper_core::library::{seed_library, FunctionLibrary};
use clapper_core::pipeline::{Engine, RunSettings};
use clapper_core::render::{
    AssembledScript, AssetCatalog, FinalSettings, MockRenderer, RenderError, Renderer, SamplingPlan, VideoFile,
    VisualArtifact,
};

/// Wraps a backend and counts calls.
pub struct Counting {
    pub inner: Arc<dyn ChatBackend>,
    pub calls: AtomicUsize,
}

impl Counting {
    pub fn new(inner: Arc<dyn ChatBackend>) -> Arc<Self> {
        Arc::new(Self { inner, calls: AtomicUsize::new(0) })
    }

    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatBackend for Counting {
    fn id(&self) -> String {
        format!("counting:{}", self.inner.id())
    }

    fn supports_images(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

/// Wraps a renderer and counts intermediate and final renders.
pub struct CountingRenderer {
    pub inner: Arc<dyn Renderer>,
    pub renders: AtomicUsize,
    pub finals: AtomicUsize,
}

impl CountingRenderer {
    pub fn new(inner: Arc<dyn Renderer>) -> Arc<Self> {
        Arc::new(Self { inner, renders: AtomicUsize::new(0), finals: AtomicUsize::new(0) })
    }

    pub fn renders(&self) -> usize {
        self.renders.load(Ordering::SeqCst)
    }

    pub fn finals(&self) -> usize {
        self.finals.load(Ordering::SeqCst)
    }
}

impl Renderer for CountingRenderer {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn render(&self, script: &AssembledScript, plan: &SamplingPlan, out_dir: &Path) -> Result<VisualArtifact, RenderError> {
        self.renders.fetch_add(1, Ordering::SeqCst);
        self.inner.render(script, plan, out_dir)
    }

    fn render_final(&self, script: &AssembledScript, settings: &FinalSettings, out_dir: &Path) -> Result<VideoFile, RenderError> {
        self.finals.fetch_add(1, Ordering::SeqCst);
        self.inner.render_final(script, settings, out_dir)
    }
}

pub struct Harness {
    pub engine: Engine,
    pub director: Arc<Counting>,
    pub programmer: Arc<Counting>,
    pub reviewer: Arc<Counting>,
    pub renderer: Arc<CountingRenderer>,
}

pub fn harness_with(
    programmer: Arc<dyn ChatBackend>,
    reviewer: Arc<dyn ChatBackend>,
    renderer: Arc<dyn Renderer>,
    library: FunctionLibrary,
    catalog: AssetCatalog,
    settings: RunSettings,
) -> Harness {
    let director = Counting::new(Arc::new(MockDirector));
    let programmer = Counting::new(programmer);
    let reviewer = Counting::new(reviewer);
    let renderer = CountingRenderer::new(renderer);
    let agent = |role, b: Arc<Counting>| Agent::new(AgentConfig::for_role(role), b);
    let runtime = AgentRuntime::new(
        agent(AgentRole::Director, director.clone()),
        agent(AgentRole::Programmer, programmer.clone()),
        agent(AgentRole::Reviewer, reviewer.clone()),
        TemplateSet::default(),
    )
    .expect("runtime");
    let engine = Engine::new(runtime, renderer.clone(), catalog, library, settings);
    Harness { engine, director, programmer, reviewer, renderer }
}

/// Mock agents and renderer with the given reviewer policy.
pub fn mock_harness(policy: ReviewerPolicy) -> Harness {
    harness_with(
        Arc::new(MockProgrammer),
        Arc::new(MockReviewer::new(policy)),
        Arc::new(MockRenderer::default()),
        seed_library(),
        AssetCatalog::empty(),
        RunSettings::default(),
    )
}

pub const DESCRIPTION: &str = "A fox walks across a meadow at sunset, then jumps over a log.";
