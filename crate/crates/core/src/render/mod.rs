//! Script assembly and renderers.

mod assemble;
mod assets;
mod blender;
mod mock;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use assemble::{assemble, rewrite_asset_refs, AssembledScript, EPILOGUE, EPILOGUE_MARKER, SNIPPETS_MARKER};
pub use assets::{AssetCatalog, AssetCategory, AssetEntry, AssetError};
pub use blender::{BlenderRenderer, ResultManifest, DEFAULT_RENDER_TIMEOUT};
pub use mock::MockRenderer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateProbe {
    pub label: String,
    pub start_frame: u32,
    pub end_frame: u32,
}

/// Which frames to capture and which armature positions to sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub keyframe_frames: Vec<u32>,
    pub coordinate_probes: Vec<CoordinateProbe>,
    pub camera_fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("plan has no keyframes")]
    NoKeyframes,
    #[error("keyframe frames must be strictly ascending")]
    NotAscending,
    #[error("probe `{0}` ends before it starts")]
    InvertedProbe(String),
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.keyframe_frames.is_empty() {
            return Err(PlanError::NoKeyframes);
        }
        if self.keyframe_frames.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PlanError::NotAscending);
        }
        if let Some(p) = self.coordinate_probes.iter().find(|p| p.end_frame < p.start_frame) {
            return Err(PlanError::InvertedProbe(p.label.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub label: String,
    pub start: [f64; 3],
    pub end: [f64; 3],
}

/// What a preview render produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualArtifact {
    pub keyframes: Vec<PathBuf>,
    pub coordinates: Vec<ProbeResult>,
    pub engine_log: String,
    pub exit_status: i32,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoFile {
    pub path: PathBuf,
    pub frame_count: u32,
    pub fps: u32,
    pub resolution: (u32, u32),
}

/// Output settings for the final video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSettings {
    pub fps: u32,
    pub duration_secs: f64,
    pub resolution: (u32, u32),
}

impl Default for FinalSettings {
    fn default() -> Self {
        Self { fps: 24, duration_secs: 5.0, resolution: (1280, 720) }
    }
}

impl FinalSettings {
    pub fn frame_count(&self) -> u32 {
        (self.duration_secs * f64::from(self.fps)).round() as u32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    /// The script raised; `message` holds the engine output verbatim.
    #[error("script failed (exit status {exit_status}):\n{message}")]
    Script { message: String, exit_status: i32 },
    #[error("render timed out after {secs} s")]
    Timeout { secs: u64 },
    #[error("render engine not found at `{probed}`")]
    EnvironmentMissing { probed: String },
    #[error("result manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("output directory {0} already exists")]
    OutputExists(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Executes assembled scripts. Implementations must be usable from several
/// sessions at once.
pub trait Renderer: Send + Sync {
    fn id(&self) -> String;

    /// Renders keyframes and probes into `out_dir`, which must not exist.
    /// Nothing is left at `out_dir` on failure.
    fn render(&self, script: &AssembledScript, plan: &SamplingPlan, out_dir: &Path) -> Result<VisualArtifact, RenderError>;

    fn render_final(
        &self,
        script: &AssembledScript,
        settings: &FinalSettings,
        out_dir: &Path,
    ) -> Result<VideoFile, RenderError>;
}

/// Runs `work` in a scratch directory beside `out_dir` and moves the result
/// into place only when it succeeds.
pub(crate) fn staged<T>(
    out_dir: &Path,
    work: impl FnOnce(&Path) -> Result<T, RenderError>,
) -> Result<T, RenderError> {
    if out_dir.exists() {
        return Err(RenderError::OutputExists(out_dir.to_path_buf()));
    }
    let parent = out_dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(parent)?;
    let out = work(staging.path())?;
    fs::rename(staging.keep(), out_dir)?;
    Ok(out)
}
