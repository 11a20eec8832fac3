//! Headless engine adapter.
//!
//! The assembled script is written to a file and run as
//! `<binary> --background --python-exit-code 1 --python <file>`. The harness
//! epilogue reads its instructions from `CLAPPER_*` environment variables and
//! answers with a JSON result manifest.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{staged, AssembledScript, FinalSettings, ProbeResult, RenderError, Renderer, SamplingPlan, VideoFile, VisualArtifact};

pub const DEFAULT_RENDER_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestProbe {
    pub label: String,
    pub start: [f64; 3],
    pub end: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub path: PathBuf,
    pub frame_count: u32,
    pub fps: u32,
    pub resolution: (u32, u32),
}

/// What the epilogue writes after a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub frames: Vec<PathBuf>,
    pub coordinates: Vec<ManifestProbe>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<ManifestVideo>,
}

#[derive(Debug, Clone)]
pub struct BlenderRenderer {
    binary: PathBuf,
    timeout: Duration,
    keyframe_resolution: (u32, u32),
}

struct RunOutput {
    manifest: ResultManifest,
    log: String,
    status: i32,
}

impl BlenderRenderer {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        Self { binary: binary.into(), timeout: DEFAULT_RENDER_TIMEOUT, keyframe_resolution: (512, 288) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_keyframe_resolution(mut self, resolution: (u32, u32)) -> Self {
        self.keyframe_resolution = resolution;
        self
    }

    /// Resolves the binary, searching `PATH` for bare names.
    pub fn probe(&self) -> Result<PathBuf, RenderError> {
        if self.binary.components().count() > 1 || self.binary.is_absolute() {
            return if self.binary.is_file() {
                Ok(self.binary.clone())
            } else {
                Err(RenderError::EnvironmentMissing { probed: self.binary.display().to_string() })
            };
        }
        let path_var = std::env::var_os("PATH").unwrap_or_default();
        std::env::split_paths(&path_var)
            .map(|d| d.join(&self.binary))
            .find(|p| p.is_file())
            .ok_or_else(|| RenderError::EnvironmentMissing { probed: format!("{} (searched PATH)", self.binary.display()) })
    }

    fn run(&self, dir: &Path, script: &AssembledScript, env: &[(&str, String)]) -> Result<RunOutput, RenderError> {
        let binary = self.probe()?;
        let script_path = dir.join("script.py");
        let manifest_path = dir.join("manifest.json");
        fs::write(&script_path, &script.text)?;
        let stdout_path = dir.join("engine.stdout");
        let stderr_path = dir.join("engine.stderr");
        let (w, h) = self.keyframe_resolution;
        let mut cmd = Command::new(&binary);
        cmd.arg("--background")
            .arg("--python-exit-code")
            .arg("1")
            .arg("--python")
            .arg(&script_path)
            .env("CLAPPER_OUTPUT_DIR", dir)
            .env("CLAPPER_MANIFEST", &manifest_path)
            .env("CLAPPER_RESOLUTION", format!("{w}x{h}"))
            .stdin(Stdio::null())
            .stdout(File::create(&stdout_path)?)
            .stderr(File::create(&stderr_path)?);
        for (k, v) in env {
            cmd.env(k, v);
        }
        tracing::debug!(binary = %binary.display(), dir = %dir.display(), "starting render");
        let mut child = cmd.spawn()?;
        let start = Instant::now();
        let status = loop {
            if let Some(s) = child.try_wait()? {
                break s;
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(RenderError::Timeout { secs: self.timeout.as_secs() });
            }
            thread::sleep(Duration::from_millis(20));
        };
        let stdout = fs::read_to_string(&stdout_path).unwrap_or_default();
        let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
        let code = status.code().unwrap_or(-1);
        if !status.success() {
            let message = if stderr.trim().is_empty() { stdout } else { stderr };
            return Err(RenderError::Script { message, exit_status: code });
        }
        let log = format!("{stdout}{stderr}");
        let text = match fs::read_to_string(&manifest_path) {
            Ok(t) => t,
            Err(_) => {
                return Err(RenderError::Script {
                    message: format!("engine exited without writing a result manifest\n{log}"),
                    exit_status: code,
                })
            }
        };
        let manifest: ResultManifest = serde_json::from_str(&text).map_err(|e| RenderError::Manifest(e.to_string()))?;
        Ok(RunOutput { manifest, log, status: code })
    }
}

impl Renderer for BlenderRenderer {
    fn id(&self) -> String {
        format!("blender:{}", self.binary.display())
    }

    fn render(&self, script: &AssembledScript, plan: &SamplingPlan, out_dir: &Path) -> Result<VisualArtifact, RenderError> {
        plan.validate()?;
        let (names, run) = staged(out_dir, |dir| {
            let plan_path = dir.join("plan.json");
            fs::write(&plan_path, serde_json::to_vec(plan).expect("plan serializes"))?;
            let run = self.run(dir, script, &[("CLAPPER_MODE", "preview".into()), ("CLAPPER_PLAN", plan_path.display().to_string())])?;
            let m = &run.manifest;
            if m.frames.len() != plan.keyframe_frames.len() {
                return Err(RenderError::Manifest(format!(
                    "plan asked for {} keyframes, manifest lists {}",
                    plan.keyframe_frames.len(),
                    m.frames.len()
                )));
            }
            if m.coordinates.len() != plan.coordinate_probes.len()
                || m.coordinates.iter().zip(&plan.coordinate_probes).any(|(c, p)| c.label != p.label)
            {
                return Err(RenderError::Manifest("coordinate samples do not match the plan's probes".into()));
            }
            let mut names = Vec::with_capacity(m.frames.len());
            for (i, f) in m.frames.iter().enumerate() {
                let src = if f.is_relative() { dir.join(f) } else { f.clone() };
                if !src.is_file() {
                    return Err(RenderError::Manifest(format!("keyframe {} is missing", src.display())));
                }
                let name = format!("keyframe_{i:02}.png");
                if src != dir.join(&name) {
                    fs::copy(&src, dir.join(&name))?;
                }
                names.push(name);
            }
            Ok((names, run))
        })?;
        Ok(VisualArtifact {
            keyframes: names.into_iter().map(|n| out_dir.join(n)).collect(),
            coordinates: run
                .manifest
                .coordinates
                .into_iter()
                .map(|c| ProbeResult { label: c.label, start: c.start, end: c.end })
                .collect(),
            engine_log: run.log,
            exit_status: run.status,
            warnings: run.manifest.warnings,
        })
    }

    fn render_final(&self, script: &AssembledScript, settings: &FinalSettings, out_dir: &Path) -> Result<VideoFile, RenderError> {
        let (w, h) = settings.resolution;
        let frame_count = settings.frame_count();
        let video = staged(out_dir, |dir| {
            let target = dir.join("video.mp4");
            let env = [
                ("CLAPPER_MODE", "final".to_string()),
                ("CLAPPER_FPS", settings.fps.to_string()),
                ("CLAPPER_FRAME_COUNT", frame_count.to_string()),
                ("CLAPPER_VIDEO", target.display().to_string()),
                ("CLAPPER_RESOLUTION", format!("{w}x{h}")),
            ];
            let run = self.run(dir, script, &env)?;
            let v = run.manifest.video.ok_or_else(|| RenderError::Manifest("final manifest lacks `video`".into()))?;
            if !target.is_file() {
                return Err(RenderError::Manifest(format!("video {} was not written", target.display())));
            }
            Ok(v)
        })?;
        Ok(VideoFile { path: out_dir.join("video.mp4"), frame_count: video.frame_count, fps: video.fps, resolution: video.resolution })
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::render::CoordinateProbe;
    use std::os::unix::fs::PermissionsExt;

    fn fake_engine(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("fake-engine.sh");
        fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
        fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
        p
    }

    fn plan() -> SamplingPlan {
        SamplingPlan {
            keyframe_frames: vec![0, 10],
            coordinate_probes: vec![CoordinateProbe { label: "walk".into(), start_frame: 0, end_frame: 10 }],
            camera_fixed: true,
        }
    }

    const WRITES_MANIFEST: &str = r#"
test "$1" = "--background" || exit 9
echo png > "$CLAPPER_OUTPUT_DIR/frame_0000.png"
echo png > "$CLAPPER_OUTPUT_DIR/frame_0010.png"
echo "rendering done"
cat > "$CLAPPER_MANIFEST" <<JSON
{"frames": ["$CLAPPER_OUTPUT_DIR/frame_0000.png", "frame_0010.png"],
 "coordinates": [{"label": "walk", "start": [0, 0, 0], "end": [3, 0, 0]}],
 "warnings": ["mode=$CLAPPER_MODE"]}
JSON
"#;

    fn script() -> AssembledScript {
        AssembledScript { text: "print('hi')\n".into() }
    }

    #[test]
    fn successful_run_parses_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let r = BlenderRenderer::new(fake_engine(tmp.path(), WRITES_MANIFEST));
        let out = tmp.path().join("frames/motion-0");
        let a = r.render(&script(), &plan(), &out).unwrap();
        assert_eq!(a.keyframes, vec![out.join("keyframe_00.png"), out.join("keyframe_01.png")]);
        assert!(a.keyframes.iter().all(|k| k.is_file()));
        assert_eq!(a.coordinates[0].end, [3.0, 0.0, 0.0]);
        assert_eq!(a.warnings, vec!["mode=preview"]);
        assert!(a.engine_log.contains("rendering done"));
        assert_eq!(fs::read_to_string(out.join("script.py")).unwrap(), script().text);
    }

    #[test]
    fn script_exception_keeps_traceback_and_leaves_nothing() {
        let tmp = tempfile::tempdir().unwrap();
        let body = "echo 'Traceback (most recent call last):' >&2\necho '  File \"script.py\", line 3, in import_asset' >&2\necho 'ValueError: unsupported asset format .glb' >&2\nexit 1";
        let r = BlenderRenderer::new(fake_engine(tmp.path(), body));
        let out = tmp.path().join("frames/scene-0");
        match r.render(&script(), &plan(), &out).unwrap_err() {
            RenderError::Script { message, exit_status } => {
                assert!(message.contains("Traceback (most recent call last):"));
                assert!(message.contains("ValueError: unsupported asset format .glb"));
                assert_eq!(exit_status, 1);
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(!out.exists());
    }

    #[test]
    fn clean_exit_without_manifest_is_a_script_error() {
        let tmp = tempfile::tempdir().unwrap();
        let r = BlenderRenderer::new(fake_engine(tmp.path(), "echo 'Error: Python: Traceback' >&2\nexit 0"));
        let err = r.render(&script(), &plan(), &tmp.path().join("o")).unwrap_err();
        assert!(matches!(err, RenderError::Script { ref message, .. } if message.contains("Traceback")));
    }

    #[test]
    fn timeout_kills_engine() {
        let tmp = tempfile::tempdir().unwrap();
        let r = BlenderRenderer::new(fake_engine(tmp.path(), "sleep 5")).with_timeout(Duration::from_millis(200));
        let start = Instant::now();
        assert!(matches!(r.render(&script(), &plan(), &tmp.path().join("o")), Err(RenderError::Timeout { .. })));
        assert!(start.elapsed() < Duration::from_secs(3));
    }

    #[test]
    fn missing_binary_names_probed_path() {
        let r = BlenderRenderer::new("/nonexistent/blender");
        match r.render(&script(), &plan(), Path::new("/tmp/never")).unwrap_err() {
            RenderError::EnvironmentMissing { probed } => assert_eq!(probed, "/nonexistent/blender"),
            e => panic!("unexpected {e:?}"),
        }
        let bare = BlenderRenderer::new("definitely-not-an-engine-binary");
        assert!(matches!(bare.probe(), Err(RenderError::EnvironmentMissing { probed }) if probed.contains("PATH")));
    }

    #[test]
    fn frame_count_mismatch_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let r = BlenderRenderer::new(fake_engine(tmp.path(), WRITES_MANIFEST));
        let mut p = plan();
        p.keyframe_frames = vec![0, 5, 10];
        assert!(matches!(r.render(&script(), &p, &tmp.path().join("o")), Err(RenderError::Manifest(_))));
    }

    #[test]
    fn final_render_reads_video_block() {
        let tmp = tempfile::tempdir().unwrap();
        let body = r#"echo mp4 > "$CLAPPER_VIDEO"
echo "{\"frames\":[],\"coordinates\":[],\"video\":{\"path\":\"$CLAPPER_VIDEO\",\"frame_count\":$CLAPPER_FRAME_COUNT,\"fps\":$CLAPPER_FPS,\"resolution\":[1280,720]}}" > "$CLAPPER_MANIFEST""#;
        let r = BlenderRenderer::new(fake_engine(tmp.path(), body));
        let out = tmp.path().join("final");
        let v = r.render_final(&script(), &FinalSettings::default(), &out).unwrap();
        assert_eq!(v.frame_count, 120);
        assert_eq!(v.fps, 24);
        assert!(v.path.is_file());
    }
}
