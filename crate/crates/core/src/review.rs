//! Sampling plans, evaluation of rendered artifacts, and feedback routing.

use serde::{Deserialize, Serialize};

use crate::agent::{AgentError, AgentRuntime, ChatExchange, Review, ReviewInput, TargetHint};
use crate::library::FunctionLibrary;
use crate::render::{CoordinateProbe, SamplingPlan, VisualArtifact};
use crate::subprocess::{SubProcessKind, SubProcessSpec};

/// Keyframe densities. Defaults: 5 keyframes per motion over 48 frames,
/// twice that for camera work, 1 for static content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub motion_keyframes: u32,
    pub frames_per_motion: u32,
    pub cinematography_multiplier: u32,
    pub static_keyframes: u32,
    /// Length of the clip used for non-motion plans.
    pub clip_frames: u32,
    pub fps: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            motion_keyframes: 5,
            frames_per_motion: 48,
            cinematography_multiplier: 2,
            static_keyframes: 1,
            clip_frames: 120,
            fps: 24,
        }
    }
}

/// `n` frames spread evenly over `[start, end]`, both ends included when
/// `n >= 2`.
fn spread(start: u32, end: u32, n: u32) -> Vec<u32> {
    match n {
        0 => vec![],
        1 => vec![start + (end - start) / 2],
        _ => (0..n)
            .map(|j| start + ((u64::from(end - start) * u64::from(j) + u64::from(n - 1) / 2) / u64::from(n - 1)) as u32)
            .collect(),
    }
}

fn unique_labels(motions: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(motions.len());
    for m in motions {
        let base = if m.trim().is_empty() { "motion".to_string() } else { m.trim().to_string() };
        let mut label = base.clone();
        let mut n = 2;
        while out.contains(&label) {
            label = format!("{base}-{n}");
            n += 1;
        }
        out.push(label);
    }
    out
}

/// Which frames to capture for `spec`.
pub fn build_sampling_plan(spec: &SubProcessSpec, cfg: &SamplingConfig) -> SamplingPlan {
    let last = cfg.clip_frames.max(1) - 1;
    let mut plan = match spec.kind {
        SubProcessKind::Motion => {
            let motions = if spec.motions.is_empty() { vec!["motion".to_string()] } else { spec.motions.clone() };
            let span = cfg.frames_per_motion.max(1);
            let mut frames = Vec::new();
            let mut probes = Vec::new();
            for (i, label) in unique_labels(&motions).into_iter().enumerate() {
                let start = i as u32 * span;
                let end = start + span - 1;
                frames.extend(spread(start, end, cfg.motion_keyframes.max(1)));
                probes.push(CoordinateProbe { label, start_frame: start, end_frame: end });
            }
            SamplingPlan { keyframe_frames: frames, coordinate_probes: probes, camera_fixed: true }
        }
        SubProcessKind::Cinematography => SamplingPlan {
            keyframe_frames: spread(0, last, cfg.motion_keyframes.max(1) * cfg.cinematography_multiplier.max(2)),
            coordinate_probes: vec![],
            camera_fixed: false,
        },
        _ => SamplingPlan { keyframe_frames: spread(0, last, cfg.static_keyframes.max(1)), coordinate_probes: vec![], camera_fixed: false },
    };
    plan.keyframe_frames.sort_unstable();
    plan.keyframe_frames.dedup();
    plan
}

/// Human-readable probe results for the Reviewer.
pub fn coordinates_text(plan: &SamplingPlan, artifact: &VisualArtifact, fps: u32) -> String {
    let fmt = |p: [f64; 3]| format!("({:.2}, {:.2}, {:.2})", p[0], p[1], p[2]);
    plan.coordinate_probes
        .iter()
        .zip(&artifact.coordinates)
        .map(|(probe, r)| {
            let d = r.end.iter().zip(&r.start).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let secs = f64::from(probe.end_frame.saturating_sub(probe.start_frame).max(1)) / f64::from(fps.max(1));
            format!(
                "motion `{}` (frames {}-{}): start {} -> end {}, distance {:.2} m, average speed {:.2} m/s",
                r.label,
                probe.start_frame,
                probe.end_frame,
                fmt(r.start),
                fmt(r.end),
                d,
                d / secs
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, thiserror::Error)]
pub enum EvaluateError {
    /// The artifact does not match its plan; a harness or renderer bug.
    #[error("artifact violates its sampling plan: {0}")]
    Contract(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Checks that `artifact` is what `plan` asked for.
pub fn check_artifact(spec: &SubProcessSpec, plan: &SamplingPlan, artifact: &VisualArtifact) -> Result<(), String> {
    if artifact.keyframes.len() != plan.keyframe_frames.len() {
        return Err(format!("expected {} keyframes, got {}", plan.keyframe_frames.len(), artifact.keyframes.len()));
    }
    if spec.kind == SubProcessKind::Motion && artifact.coordinates.is_empty() {
        return Err("motion artifact carries no coordinate samples".into());
    }
    if artifact.coordinates.len() != plan.coordinate_probes.len() {
        return Err(format!(
            "expected {} coordinate samples, got {}",
            plan.coordinate_probes.len(),
            artifact.coordinates.len()
        ));
    }
    if let Some((p, c)) = plan.coordinate_probes.iter().zip(&artifact.coordinates).find(|(p, c)| p.label != c.label) {
        return Err(format!("probe `{}` answered as `{}`", p.label, c.label));
    }
    Ok(())
}

/// Has the Reviewer judge `artifact`. Motion reviews get the measured
/// coordinates alongside the checklist.
pub fn evaluate(
    runtime: &AgentRuntime,
    spec: &SubProcessSpec,
    plan: &SamplingPlan,
    artifact: &VisualArtifact,
    cfg: &SamplingConfig,
    iteration: u32,
    log: &mut Vec<ChatExchange>,
) -> Result<Review, EvaluateError> {
    check_artifact(spec, plan, artifact).map_err(EvaluateError::Contract)?;
    let checklist = runtime.templates().checklist(spec.kind);
    let coordinates = if spec.kind == SubProcessKind::Motion { coordinates_text(plan, artifact, cfg.fps) } else { String::new() };
    let input = ReviewInput { spec, artifact, checklist: &checklist, coordinates: &coordinates, iteration };
    Ok(runtime.review(input, log)?)
}

/// What the loop does with a review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackAction {
    Accept,
    RefineArguments { suggestions: Vec<String> },
    /// Draft of a library change: why it is needed and what was asked.
    UpdateLibrary { reason: String, suggestions: Vec<String> },
}

impl FeedbackAction {
    pub fn label(&self) -> &'static str {
        match self {
            FeedbackAction::Accept => "accept",
            FeedbackAction::RefineArguments { .. } => "refine_arguments",
            FeedbackAction::UpdateLibrary { .. } => "update_library",
        }
    }
}

/// Pass accepts. A Reject goes to the library when the Reviewer hinted so
/// or the Programmer's last attempt reported a capability gap; otherwise
/// the arguments are refined.
pub fn route_feedback(review: &Review, capability_gap: bool) -> FeedbackAction {
    if review.is_pass() {
        return FeedbackAction::Accept;
    }
    let mut suggestions = review.suggestions.clone();
    if suggestions.is_empty() {
        suggestions = review.question_answers.iter().filter(|q| !q.ok).map(|q| format!("{} {}", q.question, q.answer).trim().to_string()).collect();
    }
    if review.target_hint == Some(TargetHint::UpdateLibrary) || capability_gap {
        let reason = review
            .render_error
            .clone()
            .or_else(|| suggestions.first().cloned())
            .unwrap_or_else(|| "reviewer rejected the result".into());
        FeedbackAction::UpdateLibrary { reason, suggestions }
    } else {
        FeedbackAction::RefineArguments { suggestions }
    }
}

/// Name of the innermost frame in a Python traceback.
pub fn innermost_frame(traceback: &str) -> Option<&str> {
    traceback
        .lines()
        .filter(|l| l.trim_start().starts_with("File "))
        .filter_map(|l| l.rsplit_once(", in ").map(|(_, name)| name.trim()))
        .next_back()
}

/// A failure inside a library function calls for a library fix; anything
/// else is the snippet's own fault.
pub fn hint_for_render_error(message: &str, lib: &FunctionLibrary) -> TargetHint {
    match innermost_frame(message) {
        Some(name) if lib.contains(name) => TargetHint::UpdateLibrary,
        _ => TargetHint::RefineArguments,
    }
}
