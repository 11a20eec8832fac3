//! Deterministic stand-in for the engine.
//!
//! Keyframes and coordinates are derived from a hash of the script and plan,
//! so identical inputs give bit-identical artifacts. Scripts can simulate an
//! engine failure with a top-level `raise` statement or a directive comment
//! `# mock-raise: <message> [@ <function>]`, which produces a traceback whose
//! innermost frame is `<function>`.

use std::fs;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use sha2::{Digest, Sha256};

use super::{staged, AssembledScript, FinalSettings, ProbeResult, RenderError, Renderer, SamplingPlan, VideoFile, VisualArtifact};

#[derive(Debug, Clone)]
pub struct MockRenderer {
    keyframe_resolution: (u32, u32),
}

impl Default for MockRenderer {
    fn default() -> Self {
        Self { keyframe_resolution: (96, 54) }
    }
}

fn simulated_failure(text: &str) -> Option<String> {
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if let Some(rest) = line.trim().strip_prefix("# mock-raise:") {
            let (msg, func) = match rest.split_once('@') {
                Some((m, f)) => (m.trim(), f.trim()),
                None => (rest.trim(), "<module>"),
            };
            return Some(format!(
                "Traceback (most recent call last):\n  File \"script.py\", line {lineno}, in <module>\n  File \"script.py\", line {lineno}, in {func}\n{msg}\n"
            ));
        }
        if let Some(rest) = line.strip_prefix("raise ") {
            let rest = rest.trim();
            let exc = match rest.split_once('(') {
                Some((name, args)) => {
                    let arg = args.trim_end_matches(')').trim().trim_matches(|c| c == '"' || c == '\'');
                    format!("{name}: {arg}")
                }
                None => rest.to_string(),
            };
            return Some(format!(
                "Traceback (most recent call last):\n  File \"script.py\", line {lineno}, in <module>\n{exc}\n"
            ));
        }
    }
    None
}

fn unit(seed: &[u8], salt: &str) -> f64 {
    let h = Sha256::new().chain_update(seed).chain_update(salt.as_bytes()).finalize();
    let v = u64::from_le_bytes(h[..8].try_into().expect("8 bytes"));
    v as f64 / u64::MAX as f64
}

fn coord(seed: &[u8], salt: &str) -> [f64; 3] {
    let c = |axis: &str| ((unit(seed, &format!("{salt}/{axis}")) * 10.0 - 5.0) * 1000.0).round() / 1000.0;
    [c("x"), c("y"), 0.0]
}

impl MockRenderer {
    pub fn new(keyframe_resolution: (u32, u32)) -> Self {
        Self { keyframe_resolution }
    }

    fn digest(script: &AssembledScript, plan: &SamplingPlan) -> Vec<u8> {
        let plan_json = serde_json::to_vec(plan).expect("plan serializes");
        Sha256::new().chain_update(script.text.as_bytes()).chain_update([0u8]).chain_update(plan_json).finalize().to_vec()
    }

    fn keyframe(&self, seed: &[u8], frame: u32) -> RgbImage {
        let (w, h) = self.keyframe_resolution;
        let base = [seed[0], seed[1], seed[2]];
        let shift = (frame % 256) as u8;
        RgbImage::from_fn(w, h, |x, y| {
            let gx = (x * 255 / w.max(1)) as u8;
            let gy = (y * 255 / h.max(1)) as u8;
            Rgb([base[0] ^ gx, base[1].wrapping_add(shift) ^ gy, base[2] ^ gx.wrapping_add(gy)])
        })
    }
}

impl Renderer for MockRenderer {
    fn id(&self) -> String {
        format!("mock:{}x{}", self.keyframe_resolution.0, self.keyframe_resolution.1)
    }

    fn render(&self, script: &AssembledScript, plan: &SamplingPlan, out_dir: &Path) -> Result<VisualArtifact, RenderError> {
        plan.validate()?;
        if let Some(message) = simulated_failure(&script.text) {
            return Err(RenderError::Script { message, exit_status: 1 });
        }
        let seed = Self::digest(script, plan);
        let names = staged(out_dir, |dir| {
            fs::write(dir.join("script.py"), &script.text)?;
            let mut names = Vec::new();
            for (i, &frame) in plan.keyframe_frames.iter().enumerate() {
                let name = format!("keyframe_{i:02}.png");
                self.keyframe(&seed, frame)
                    .save_with_format(dir.join(&name), ImageFormat::Png)
                    .map_err(|e| RenderError::Io(std::io::Error::other(e)))?;
                names.push(name);
            }
            Ok(names)
        })?;
        let coordinates = plan
            .coordinate_probes
            .iter()
            .map(|p| ProbeResult {
                label: p.label.clone(),
                start: coord(&seed, &format!("{}/start", p.label)),
                end: coord(&seed, &format!("{}/end", p.label)),
            })
            .collect();
        Ok(VisualArtifact {
            keyframes: names.into_iter().map(|n| out_dir.join(n)).collect(),
            coordinates,
            engine_log: format!(
                "mock render {}: {} keyframes, {} probes\n",
                &hex::encode(&seed)[..12],
                plan.keyframe_frames.len(),
                plan.coordinate_probes.len()
            ),
            exit_status: 0,
            warnings: Vec::new(),
        })
    }

    fn render_final(&self, script: &AssembledScript, settings: &FinalSettings, out_dir: &Path) -> Result<VideoFile, RenderError> {
        if let Some(message) = simulated_failure(&script.text) {
            return Err(RenderError::Script { message, exit_status: 1 });
        }
        let frame_count = settings.frame_count();
        staged(out_dir, |dir| {
            fs::write(dir.join("script.py"), &script.text)?;
            fs::write(
                dir.join("video.mp4"),
                format!(
                    "CLAPPER MOCK VIDEO\nscript {}\nframes {frame_count}\nfps {}\nresolution {}x{}\n",
                    script.sha256(),
                    settings.fps,
                    settings.resolution.0,
                    settings.resolution.1
                ),
            )?;
            Ok(())
        })?;
        Ok(VideoFile { path: out_dir.join("video.mp4"), frame_count, fps: settings.fps, resolution: settings.resolution })
    }
}
