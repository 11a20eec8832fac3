//! The single TOML config file. Relative paths resolve against the file's
//! directory.
//!
//! ```toml
//! max_review_iterations = 15
//! session_root = "sessions"
//!
//! [agents.reviewer]
//! backend = "http"
//! model = "gpt-4o"
//!
//! [renderer]
//! kind = "blender"
//! binary = "/opt/blender/blender"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Engine, RunSettings, SessionStore, DEFAULT_MAX_REVIEW_ITERATIONS};
use crate::agent::mock::{MockDirector, MockProgrammer, MockReviewer, ReviewerPolicy};
use crate::agent::{Agent, AgentConfig, AgentRole, AgentRuntime, ChatBackend, FixtureBackend, HttpChatBackend, RetryPolicy, TemplateSet};
use crate::library::LibraryStore;
use crate::rag::{Embedder, HashingEmbedder, HttpEmbedder, RagStore, DEFAULT_CHUNK_WORDS, DEFAULT_HASHING_DIM, DEFAULT_OVERLAP_WORDS};
use crate::render::{AssetCatalog, BlenderRenderer, FinalSettings, MockRenderer, Renderer, DEFAULT_RENDER_TIMEOUT};
use crate::review::SamplingConfig;

pub const API_KEY_ENV: &str = "CLAPPER_API_KEY";
pub const BASE_URL_ENV: &str = "CLAPPER_BASE_URL";
pub const ENGINE_BINARY_ENV: &str = "CLAPPER_ENGINE";
const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("building {what}: {message}")]
    Build { what: &'static str, message: String },
}

fn invalid(m: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(m.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
    Fixtures,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub backend: BackendKind,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub template: Option<String>,
    pub rag_top_k: Option<usize>,
    pub parse_retries: Option<u32>,
    pub base_url: Option<String>,
    /// Name of the env var holding the key.
    pub api_key_env: Option<String>,
    pub fixtures_dir: Option<PathBuf>,
    /// Mock reviewer only: `pass`, `reject`, or `scripted:reject,pass`.
    pub mock_policy: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RendererKind {
    #[default]
    Mock,
    Blender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RendererSection {
    pub kind: RendererKind,
    pub binary: Option<PathBuf>,
    pub timeout_secs: u64,
    /// Reviewer keyframe size; the renderer's own default when absent.
    pub keyframe_resolution: Option<(u32, u32)>,
}

impl Default for RendererSection {
    fn default() -> Self {
        Self { kind: RendererKind::Mock, binary: None, timeout_secs: DEFAULT_RENDER_TIMEOUT.as_secs(), keyframe_resolution: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    Hashing,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RagSection {
    pub enabled: bool,
    pub index: PathBuf,
    pub chunk_words: usize,
    pub overlap_words: usize,
    pub budget_chars: usize,
    pub embedder: EmbedderKind,
    pub dimension: usize,
    pub embedding_model: String,
    pub base_url: Option<String>,
}

impl Default for RagSection {
    fn default() -> Self {
        Self {
            enabled: false,
            index: PathBuf::from("rag/index.json"),
            chunk_words: DEFAULT_CHUNK_WORDS,
            overlap_words: DEFAULT_OVERLAP_WORDS,
            budget_chars: crate::agent::DEFAULT_RAG_BUDGET_CHARS,
            embedder: EmbedderKind::Hashing,
            dimension: DEFAULT_HASHING_DIM,
            embedding_model: "text-embedding-3-small".into(),
            base_url: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibrarySection {
    pub root: PathBuf,
    pub name: String,
}

impl Default for LibrarySection {
    fn default() -> Self {
        Self { root: PathBuf::from("libraries"), name: "seed".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetsSection {
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub max_review_iterations: u32,
    pub session_root: PathBuf,
    pub templates_dir: Option<PathBuf>,
    pub agents: BTreeMap<AgentRole, AgentSection>,
    pub renderer: RendererSection,
    #[serde(rename = "final")]
    pub final_settings: FinalSettings,
    pub sampling: SamplingConfig,
    pub rag: RagSection,
    pub library: LibrarySection,
    pub assets: AssetsSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            max_review_iterations: DEFAULT_MAX_REVIEW_ITERATIONS,
            session_root: PathBuf::from("sessions"),
            templates_dir: None,
            agents: AgentRole::ALL.iter().map(|r| (*r, AgentSection::default())).collect(),
            renderer: RendererSection::default(),
            final_settings: FinalSettings::default(),
            sampling: SamplingConfig::default(),
            rag: RagSection::default(),
            library: LibrarySection::default(),
            assets: AssetsSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl SessionConfig {
    /// Mock agents and renderer, rooted at `base_dir`.
    pub fn mock_all(base_dir: impl Into<PathBuf>) -> Self {
        Self { base_dir: base_dir.into(), ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            ConfigError::Invalid(message) => ConfigError::Parse { path: path.to_path_buf(), message },
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: SessionConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        for role in AgentRole::ALL {
            cfg.agents.entry(role).or_default();
        }
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_review_iterations == 0 {
            return Err(invalid("max_review_iterations must be at least 1"));
        }
        if self.agents.len() != AgentRole::ALL.len() {
            return Err(invalid("exactly three agent roles must be configured"));
        }
        for (role, a) in &self.agents {
            if a.mock_policy.is_some() && *role != AgentRole::Reviewer {
                return Err(invalid(format!("mock_policy only applies to the reviewer, not {role}")));
            }
            if a.backend == BackendKind::Fixtures && a.fixtures_dir.is_none() {
                return Err(invalid(format!("{role} uses fixtures but sets no fixtures_dir")));
            }
            if let Some(p) = &a.mock_policy {
                p.parse::<ReviewerPolicy>().map_err(invalid)?;
            }
        }
        if self.rag.overlap_words >= self.rag.chunk_words {
            return Err(invalid("rag.overlap_words must be smaller than rag.chunk_words"));
        }
        if self.final_settings.fps == 0 || self.final_settings.duration_secs <= 0.0 {
            return Err(invalid("final fps and duration must be positive"));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            max_review_iterations: self.max_review_iterations,
            sampling: self.sampling.clone(),
            final_settings: self.final_settings.clone(),
        }
    }

    pub fn session_store(&self) -> SessionStore {
        SessionStore::new(self.resolve(&self.session_root))
    }

    pub fn library_store(&self) -> LibraryStore {
        LibraryStore::new(self.resolve(&self.library.root))
    }

    pub fn rag_index_path(&self) -> PathBuf {
        self.resolve(&self.rag.index)
    }

    pub fn templates(&self) -> Result<TemplateSet, ConfigError> {
        match &self.templates_dir {
            Some(dir) => TemplateSet::with_overrides(&self.resolve(dir))
                .map_err(|e| ConfigError::Build { what: "templates", message: e.to_string() }),
            None => Ok(TemplateSet::default()),
        }
    }

    pub fn embedder(&self) -> Arc<dyn Embedder> {
        match self.rag.embedder {
            EmbedderKind::Hashing => Arc::new(HashingEmbedder::new(self.rag.dimension)),
            EmbedderKind::Http => Arc::new(HttpEmbedder::new(
                self.rag.base_url.clone().unwrap_or_else(default_base_url),
                env_key(API_KEY_ENV),
                self.rag.embedding_model.clone(),
                self.rag.dimension,
            )),
        }
    }

    fn agent(&self, role: AgentRole) -> Result<Agent, ConfigError> {
        let a = self.agents.get(&role).cloned().unwrap_or_default();
        let mut cfg = AgentConfig::for_role(role);
        cfg.backend_ref = serde_json::to_value(a.backend).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        if let Some(m) = a.model.clone() {
            cfg.model_id = m;
        }
        if let Some(t) = a.temperature {
            cfg.temperature = t;
        }
        if let Some(t) = a.template.clone() {
            cfg.prompt_template_ref = t;
        }
        if let Some(k) = a.rag_top_k {
            cfg.rag_top_k = k;
        }
        if let Some(r) = a.parse_retries {
            cfg.parse_retries = r;
        }
        let backend: Arc<dyn ChatBackend> = match a.backend {
            BackendKind::Mock => match role {
                AgentRole::Director => Arc::new(MockDirector),
                AgentRole::Programmer => Arc::new(MockProgrammer),
                AgentRole::Reviewer => {
                    let policy = a.mock_policy.as_deref().unwrap_or("pass").parse::<ReviewerPolicy>().map_err(invalid)?;
                    Arc::new(MockReviewer::new(policy))
                }
            },
            BackendKind::Http => {
                let key = match &a.api_key_env {
                    Some(var) => std::env::var(var).ok(),
                    None => env_key(API_KEY_ENV),
                };
                let base = a.base_url.clone().unwrap_or_else(default_base_url);
                Arc::new(HttpChatBackend::new(base, key, RetryPolicy::default(), role == AgentRole::Reviewer))
            }
            BackendKind::Fixtures => {
                let dir = self.resolve(a.fixtures_dir.as_deref().unwrap_or(Path::new("fixtures")));
                Arc::new(FixtureBackend::open(dir).map_err(|e| ConfigError::Build { what: "fixture backend", message: e.to_string() })?)
            }
        };
        Ok(Agent::new(cfg, backend))
    }

    pub fn renderer(&self) -> Arc<dyn Renderer> {
        match self.renderer.kind {
            RendererKind::Mock => Arc::new(match self.renderer.keyframe_resolution {
                Some(r) => MockRenderer::new(r),
                None => MockRenderer::default(),
            }),
            RendererKind::Blender => {
                let binary = std::env::var_os(ENGINE_BINARY_ENV)
                    .map(PathBuf::from)
                    .or_else(|| self.renderer.binary.clone())
                    .unwrap_or_else(|| PathBuf::from("blender"));
                let mut r = BlenderRenderer::new(binary).with_timeout(Duration::from_secs(self.renderer.timeout_secs));
                if let Some(res) = self.renderer.keyframe_resolution {
                    r = r.with_keyframe_resolution(res);
                }
                Arc::new(r)
            }
        }
    }

    pub fn build_runtime(&self) -> Result<AgentRuntime, ConfigError> {
        let runtime = AgentRuntime::new(
            self.agent(AgentRole::Director)?,
            self.agent(AgentRole::Programmer)?,
            self.agent(AgentRole::Reviewer)?,
            self.templates()?,
        )
        .map_err(|e| ConfigError::Build { what: "agents", message: e.to_string() })?;
        if !self.rag.enabled {
            return Ok(runtime);
        }
        let index = self.rag_index_path();
        let store = if index.is_file() {
            RagStore::load(&index, self.embedder()).map_err(|e| ConfigError::Build { what: "rag index", message: e.to_string() })?
        } else {
            tracing::warn!(index = %index.display(), "retrieval enabled but no index found; prompts carry no context");
            RagStore::new(self.embedder())
        };
        Ok(runtime.with_rag(Arc::new(store), self.rag.budget_chars))
    }

    pub fn build_engine(&self) -> Result<Engine, ConfigError> {
        let runtime = self.build_runtime()?;
        let renderer = self.renderer();
        let catalog = match &self.assets.catalog {
            Some(p) => AssetCatalog::load(&self.resolve(p)).map_err(|e| ConfigError::Build { what: "asset catalog", message: e.to_string() })?,
            None => AssetCatalog::empty(),
        };
        let library = self
            .library_store()
            .load_or_seed(&self.library.name)
            .map_err(|e| ConfigError::Build { what: "function library", message: e.to_string() })?;
        Ok(Engine::new(runtime, renderer, catalog, library, self.run_settings()))
    }
}

fn env_key(primary: &str) -> Option<String> {
    std::env::var(primary).ok().or_else(|| std::env::var("OPENAI_API_KEY").ok()).filter(|k| !k.is_empty())
}

fn default_base_url() -> String {
    std::env::var(BASE_URL_ENV)
        .or_else(|_| std::env::var("OPENAI_BASE_URL"))
        .unwrap_or_else(|_| DEFAULT_BASE_URL.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_mock_defaults() {
        let cfg = SessionConfig::parse("", Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.max_review_iterations, 15);
        assert_eq!(cfg.agents.len(), 3);
        assert_eq!(cfg.session_store().root(), Path::new("/tmp/x/sessions"));
        assert!(cfg.build_engine().is_ok());
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            max_review_iterations = 3
            [agents.reviewer]
            mock_policy = "scripted:reject,pass"
            temperature = 0.0
            [renderer]
            kind = "blender"
            binary = "/opt/blender/blender"
            keyframe_resolution = [640, 360]
            [final]
            fps = 30
            duration_secs = 4.0
            resolution = [1920, 1080]
            [sampling]
            motion_keyframes = 3
        "#;
        let cfg = SessionConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.max_review_iterations, 3);
        assert_eq!(cfg.renderer.kind, RendererKind::Blender);
        assert_eq!(cfg.renderer.keyframe_resolution, Some((640, 360)));
        assert_eq!(cfg.final_settings.frame_count(), 120);
        assert_eq!(cfg.sampling.motion_keyframes, 3);
        assert_eq!(cfg.sampling.frames_per_motion, 48);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "max_review_iterations = 0",
            "[agents.director]\nmock_policy = \"pass\"",
            "[agents.reviewer]\nmock_policy = \"sometimes\"",
            "[agents.programmer]\nbackend = \"fixtures\"",
            "[rag]\nchunk_words = 10\noverlap_words = 10",
            "unknown_key = 1",
        ] {
            assert!(SessionConfig::parse(text, Path::new(".")).is_err(), "{text}");
        }
    }

    #[test]
    fn missing_file_is_a_read_error() {
        assert!(matches!(SessionConfig::load(Path::new("/nonexistent/clapper.toml")), Err(ConfigError::Read { .. })));
    }
}
