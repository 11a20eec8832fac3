//! Offline stand-ins for the three roles.
//!
//! They read the prompts produced by the built-in templates and answer in
//! the expected structured format, which is enough to drive a whole session
//! without network access.

use std::str::FromStr;
use std::sync::Mutex;

use serde_json::json;

use super::backend::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use super::review::Verdict;

const MOTION_WORDS: &[&str] = &["walk", "run", "jump", "dance", "wave", "sit", "turn", "fly", "swim", "climb"];
const CAMERA_WORDS: &[&str] = &["pan", "orbit", "follow", "track", "dolly", "zoom", "circle", "fly-through"];

/// Text between `header` and the next blank line.
fn section<'a>(text: &'a str, header: &str) -> Option<&'a str> {
    let start = text.find(header)? + header.len();
    let rest = text[start..].strip_prefix('\n').unwrap_or(&text[start..]);
    Some(rest.split("\n\n").next().unwrap_or(rest).trim())
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '-').filter(|w| !w.is_empty()).map(str::to_ascii_lowercase).collect()
}

fn detect_motions(description: &str) -> Vec<String> {
    let ws = words(description);
    let mut found: Vec<(usize, &str)> = MOTION_WORDS
        .iter()
        .filter_map(|m| ws.iter().position(|w| w.starts_with(m) && w.len() <= m.len() + 3).map(|p| (p, *m)))
        .collect();
    found.sort();
    found.into_iter().map(|(_, m)| m.to_string()).collect()
}

/// Director that enriches each aspect with fixed, concrete defaults.
#[derive(Debug, Default)]
pub struct MockDirector;

impl MockDirector {
    pub fn reply_for(description: &str) -> String {
        let d = description.trim();
        let lower = d.to_ascii_lowercase();
        let motions = detect_motions(d);
        let camera_moves = lower.contains("camera") && CAMERA_WORDS.iter().any(|w| lower.contains(w));
        let preset = ["sunset", "night", "overcast", "studio"].into_iter().find(|p| lower.contains(p)).unwrap_or("daylight");
        let motion_text = if motions.is_empty() {
            "Characters hold an idle pose for the whole clip.".to_string()
        } else {
            format!("Play {} in order, 48 frames each, moving along +Y at about 1.4 m/s.", motions.join(", then "))
        };
        let camera_text = if camera_moves {
            "Start at (0, -10, 2) with a 50 degree lens and orbit a quarter turn around the subject over the clip."
        } else {
            "Static camera at (0, -10, 2) with a 50 degree lens looking at (0, 0, 1)."
        };
        let reply = json!({"subprocesses": [
            {"kind": "scene", "guidance": format!("Environment for \"{d}\": flat ground plane at z = 0, props placed within 10 m of the origin at real-world scale.")},
            {"kind": "character", "guidance": format!("Characters of \"{d}\": import each one, scale to a real height of about 1.8 m, stand on the ground at the origin facing +Y.")},
            {"kind": "motion", "guidance": motion_text, "motions": motions},
            {"kind": "lighting", "guidance": format!("Use the {preset} lighting preset with the key light from the upper left.")},
            {"kind": "cinematography", "guidance": camera_text, "camera_moves": camera_moves},
        ]});
        format!("Here is the breakdown.\n```json\n{reply:#}\n```\n")
    }
}

impl ChatBackend for MockDirector {
    fn id(&self) -> String {
        "mock-director".into()
    }

    fn supports_images(&self) -> bool {
        false
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let text = request.last_user_text();
        let description = section(&text, "Video description:").unwrap_or(&text).to_string();
        Ok(ChatResponse::new(Self::reply_for(&description)))
    }
}

/// Programmer that writes seed-library calls for each sub-process.
#[derive(Debug, Default)]
pub struct MockProgrammer;

fn first_asset(listing: &str, category: &str) -> Option<String> {
    listing.lines().find_map(|l| {
        let rest = l.trim().strip_prefix("- asset:")?;
        let (id, tail) = rest.split_once(' ')?;
        tail.starts_with(&format!("({category})")).then(|| id.to_string())
    })
}

impl MockProgrammer {
    pub fn snippet_for(kind: &str, guidance: &str, assets: &str, refined: bool) -> String {
        let nudge = if refined { 0.5 } else { 0.0 };
        match kind {
            "scene" => {
                let mut s = String::from("import bpy\nbpy.ops.mesh.primitive_plane_add(size=50.0, location=(0.0, 0.0, 0.0))\n");
                if let Some(id) = first_asset(assets, "scene_object") {
                    s.push_str(&format!("prop = import_asset(\"asset:{id}\")\nplace_object(prop, ({:.1}, 4.0, 0.0))\n", 3.0 + nudge));
                }
                s
            }
            "character" => {
                let import = match first_asset(assets, "character") {
                    Some(id) => format!("hero = import_asset(\"asset:{id}\")\n"),
                    None => "bpy.ops.mesh.primitive_cylinder_add(radius=0.3, depth=1.8)\nhero = bpy.context.active_object\n".into(),
                };
                format!(
                    "import bpy\n{import}hero.name = \"hero\"\nscale_to_real_height(hero, {:.1})\nplace_object(hero, (0.0, 0.0, 0.0))\nrotate_to_face(hero, (0.0, 5.0, 0.0))\n",
                    1.8 - nudge / 5.0
                )
            }
            "motion" => {
                let motions: Vec<String> = section(guidance, "Play ")
                    .map(|_| detect_motions(guidance))
                    .unwrap_or_default();
                let mut s = String::from("import bpy\nrig = bpy.data.objects.get(\"hero\")\n");
                for (i, m) in motions.iter().enumerate() {
                    let clip = first_asset(assets, "motion_clip").map(|id| format!("\"asset:{id}\"")).unwrap_or_else(|| format!("\"clips/{m}.fbx\""));
                    let (start, end) = (1 + 48 * i, 48 * (i + 1));
                    let (y0, y1) = (2.0 * i as f64, 2.0 * (i + 1) as f64 + nudge);
                    s.push_str(&format!(
                        "assign_motion(rig, {clip}, {start}, {end}, (0.0, {y0:.1}, 0.0), (0.0, {y1:.1}, 0.0))\n"
                    ));
                }
                s
            }
            "lighting" => {
                let preset = ["sunset", "night", "overcast", "studio"].into_iter().find(|p| guidance.contains(p)).unwrap_or("daylight");
                format!("set_lighting(\"{preset}\")\n")
            }
            _ => {
                let mut s = format!("place_camera((0.0, {:.1}, 2.0), (0.0, 0.0, 1.0), fov_degrees=50.0)\n", -10.0 + nudge);
                if guidance.contains("orbit") {
                    s.push_str("animate_camera([(1, (0.0, -10.0, 2.0), (0.0, 0.0, 1.0)), (120, (10.0, 0.0, 2.0), (0.0, 0.0, 1.0))])\n");
                }
                s
            }
        }
    }

    fn library_update(index: &str) -> String {
        let exists = index.lines().any(|l| l.trim_start().starts_with("chain_motions("));
        let body = "def chain_motions(armature, clips, gap_frames=0):\n    \"\"\"Play (clip, length) pairs back to back on one armature.\"\"\"\n    frame = 1\n    for clip, length in clips:\n        assign_motion(armature, clip, frame, frame + length - 1, None, None)\n        frame += length + gap_frames\n    return frame\n";
        let reply = json!({"updates": [{
            "action": if exists { "replace" } else { "add" },
            "name": "chain_motions",
            "body": body,
            "docstring": "Play motion clips back to back on one armature.",
            "reason": "temporally align multiple motions",
        }]});
        format!("```json\n{reply:#}\n```\n")
    }
}

impl ChatBackend for MockProgrammer {
    fn id(&self) -> String {
        "mock-programmer".into()
    }

    fn supports_images(&self) -> bool {
        false
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let text = request.messages.first().map(|m| m.text()).unwrap_or_default();
        if text.contains("{\"updates\"") {
            return Ok(ChatResponse::new(Self::library_update(section(&text, "Current functions:").unwrap_or(""))));
        }
        let kind = section(&text, "Sub-process:").and_then(|s| s.lines().next()).unwrap_or("scene").trim().to_string();
        let guidance = section(&text, "Guidance:").unwrap_or("");
        let assets = section(&text, "Available assets:").unwrap_or("");
        let refined = section(&text, "Reviewer feedback:").is_some_and(|f| f != "(none)");
        let snippet = Self::snippet_for(&kind, guidance, assets, refined);
        let reply = json!({"snippet": snippet, "capability_gap": false, "notes": format!("{kind} snippet")});
        Ok(ChatResponse::new(format!("```json\n{reply:#}\n```\n")))
    }
}

/// One scripted mock review.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockVerdict {
    Pass,
    Reject,
    /// Reject and point at the function library.
    RejectLibrary,
}

impl From<Verdict> for MockVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => MockVerdict::Pass,
            Verdict::Reject => MockVerdict::Reject,
        }
    }
}

/// How the mock reviewer decides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReviewerPolicy {
    Pass,
    Reject,
    /// Verdicts served in call order; Pass once exhausted.
    Scripted(Vec<MockVerdict>),
}

impl FromStr for ReviewerPolicy {
    type Err = String;

    /// `pass`, `reject`, or `scripted:reject,reject_library,pass`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "pass" => Ok(ReviewerPolicy::Pass),
            "reject" => Ok(ReviewerPolicy::Reject),
            _ => {
                let list = s.strip_prefix("scripted:").ok_or_else(|| format!("unknown reviewer policy `{s}`"))?;
                list.split(',')
                    .map(|v| match v.trim() {
                        "pass" => Ok(MockVerdict::Pass),
                        "reject" => Ok(MockVerdict::Reject),
                        "reject_library" => Ok(MockVerdict::RejectLibrary),
                        other => Err(format!("unknown verdict `{other}` in scripted policy")),
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(ReviewerPolicy::Scripted)
            }
        }
    }
}

#[derive(Debug)]
pub struct MockReviewer {
    policy: ReviewerPolicy,
    cursor: Mutex<usize>,
}

impl MockReviewer {
    pub fn new(policy: ReviewerPolicy) -> Self {
        Self { policy, cursor: Mutex::new(0) }
    }

    fn next_verdict(&self) -> MockVerdict {
        match &self.policy {
            ReviewerPolicy::Pass => MockVerdict::Pass,
            ReviewerPolicy::Reject => MockVerdict::Reject,
            ReviewerPolicy::Scripted(list) => {
                let mut c = self.cursor.lock().expect("reviewer lock");
                let v = list.get(*c).copied().unwrap_or(MockVerdict::Pass);
                *c += 1;
                v
            }
        }
    }

    pub fn reply(verdict: Verdict, questions: &[String]) -> String {
        Self::reply_as(verdict.into(), questions)
    }

    pub fn reply_as(mock: MockVerdict, questions: &[String]) -> String {
        let verdict = if mock == MockVerdict::Pass { Verdict::Pass } else { Verdict::Reject };
        let failing = questions.iter().position(|q| q.contains("ending point")).unwrap_or(0);
        let qs: Vec<_> = questions
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let ok = verdict == Verdict::Pass || i != failing;
                json!({"question": q, "answer": if ok { "yes" } else { "no, it stops short of the target" }, "ok": ok})
            })
            .collect();
        let qs = if qs.is_empty() && verdict == Verdict::Reject {
            vec![json!({"question": "overall", "answer": "not acceptable", "ok": false})]
        } else {
            qs
        };
        let suggestions: Vec<&str> =
            if verdict == Verdict::Reject { vec!["change ending coordinates so the character stops at the requested point"] } else { vec![] };
        let reply = json!({
            "verdict": if verdict == Verdict::Pass { "Pass" } else { "Reject" },
            "questions": qs,
            "suggestions": suggestions,
            "target_hint": match mock {
                MockVerdict::Pass => json!(null),
                MockVerdict::Reject => json!("refine_arguments"),
                MockVerdict::RejectLibrary => json!("update_library"),
            },
        });
        format!("```json\n{reply:#}\n```\n")
    }
}

impl ChatBackend for MockReviewer {
    fn id(&self) -> String {
        "mock-reviewer".into()
    }

    fn supports_images(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let text = request.messages.first().map(|m| m.text()).unwrap_or_default();
        let questions: Vec<String> = section(&text, "Answer every question:")
            .unwrap_or("")
            .lines()
            .filter_map(|l| l.split_once(". ").map(|(_, q)| q.trim().to_string()))
            .collect();
        Ok(ChatResponse::new(Self::reply_as(self.next_verdict(), &questions)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parsing() {
        assert_eq!("pass".parse::<ReviewerPolicy>().unwrap(), ReviewerPolicy::Pass);
        assert_eq!(
            "scripted:reject, reject,pass".parse::<ReviewerPolicy>().unwrap(),
            ReviewerPolicy::Scripted(vec![MockVerdict::Reject, MockVerdict::Reject, MockVerdict::Pass])
        );
        assert_eq!(
            "scripted:reject_library".parse::<ReviewerPolicy>().unwrap(),
            ReviewerPolicy::Scripted(vec![MockVerdict::RejectLibrary])
        );
        assert!("maybe".parse::<ReviewerPolicy>().is_err());
        assert!("scripted:pass,meh".parse::<ReviewerPolicy>().is_err());
    }

    #[test]
    fn motion_detection_keeps_order() {
        assert_eq!(detect_motions("A fox jumps over a log, then walks home"), vec!["jump", "walk"]);
        assert!(detect_motions("A quiet lake").is_empty());
    }
}
