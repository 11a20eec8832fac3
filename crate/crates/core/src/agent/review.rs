use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::extract::last_json_block;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetHint {
    RefineArguments,
    UpdateLibrary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionAnswer {
    pub question: String,
    pub answer: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub verdict: Verdict,
    pub question_answers: Vec<QuestionAnswer>,
    pub suggestions: Vec<String>,
    #[serde(default)]
    pub target_hint: Option<TargetHint>,
    pub iteration: u32,
    /// Engine error text when this review stands in for a failed render.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render_error: Option<String>,
}

impl Review {
    pub fn is_pass(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// A Reject that carries a render failure back to the Programmer.
    pub fn from_render_error(error_text: &str, hint: TargetHint, iteration: u32) -> Self {
        Self {
            verdict: Verdict::Reject,
            question_answers: vec![QuestionAnswer {
                question: "Does the script run without errors?".into(),
                answer: error_text.trim().to_string(),
                ok: false,
            }],
            suggestions: vec![format!("Fix the error raised while running the script:\n{}", error_text.trim())],
            target_hint: Some(hint),
            iteration,
            render_error: Some(error_text.to_string()),
        }
    }

    /// Text handed to the Programmer as feedback.
    pub fn feedback_text(&self) -> String {
        let mut out = format!("Verdict: {}\n", if self.is_pass() { "Pass" } else { "Reject" });
        let failed: Vec<_> = self.question_answers.iter().filter(|q| !q.ok).collect();
        if !failed.is_empty() {
            out.push_str("Failed checks:\n");
            for q in failed {
                out.push_str(&format!("- {} {}\n", q.question, q.answer));
            }
        }
        if !self.suggestions.is_empty() {
            out.push_str("Suggestions:\n");
            for s in &self.suggestions {
                out.push_str(&format!("- {s}\n"));
            }
        }
        out
    }
}

/// Review content before the loop assigns an iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReviewDraft {
    pub verdict: Verdict,
    pub question_answers: Vec<QuestionAnswer>,
    pub suggestions: Vec<String>,
    pub target_hint: Option<TargetHint>,
}

impl ReviewDraft {
    pub fn at(self, iteration: u32) -> Review {
        Review {
            verdict: self.verdict,
            question_answers: self.question_answers,
            suggestions: self.suggestions,
            target_hint: self.target_hint,
            iteration,
            render_error: None,
        }
    }
}

fn verdict_word(s: &str) -> Option<Verdict> {
    let w = s.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_lowercase();
    match w.as_str() {
        "pass" | "passed" | "accept" | "accepted" => Some(Verdict::Pass),
        "reject" | "rejected" | "fail" | "failed" => Some(Verdict::Reject),
        _ => None,
    }
}

fn hint_word(s: &str) -> Option<TargetHint> {
    let w: String = s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
    match w.as_str() {
        "updatelibrary" => Some(TargetHint::UpdateLibrary),
        "refinearguments" => Some(TargetHint::RefineArguments),
        _ => None,
    }
}

fn from_json(v: &Value) -> Result<Option<ReviewDraft>, String> {
    let Some(obj) = v.as_object() else { return Ok(None) };
    let Some(raw_verdict) = obj.get("verdict") else { return Ok(None) };
    let verdict = raw_verdict
        .as_str()
        .and_then(verdict_word)
        .ok_or_else(|| format!("`verdict` must be \"Pass\" or \"Reject\", got {raw_verdict}"))?;
    let mut question_answers = Vec::new();
    if let Some(qs) = obj.get("questions").or_else(|| obj.get("question_answers")) {
        let qs = qs.as_array().ok_or("`questions` must be a list")?;
        for (i, q) in qs.iter().enumerate() {
            let question = q.get("question").and_then(Value::as_str).ok_or(format!("question {i} lacks `question` text"))?;
            let answer = q.get("answer").and_then(Value::as_str).unwrap_or("");
            let ok = q.get("ok").and_then(Value::as_bool).ok_or(format!("question {i} lacks a boolean `ok`"))?;
            question_answers.push(QuestionAnswer { question: question.into(), answer: answer.into(), ok });
        }
    }
    let suggestions = match obj.get("suggestions") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .map(|s| s.as_str().map(str::to_string).ok_or("suggestions must be strings".to_string()))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err("`suggestions` must be a list of strings".into()),
    };
    let target_hint = match obj.get("target_hint") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(hint_word(s).ok_or(format!("unknown target_hint `{s}`"))?),
        Some(other) => return Err(format!("unknown target_hint {other}")),
    };
    Ok(Some(ReviewDraft { verdict, question_answers, suggestions, target_hint }))
}

fn bullet(line: &str) -> Option<&str> {
    let t = line.trim_start();
    for p in ["- ", "* ", "• "] {
        if let Some(rest) = t.strip_prefix(p) {
            return Some(rest.trim());
        }
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some(r.trim());
        }
    }
    None
}

fn from_text(raw: &str) -> Option<ReviewDraft> {
    let mut verdict = None;
    let mut target_hint = None;
    let mut suggestions = Vec::new();
    for line in raw.lines() {
        let plain: String = line.chars().filter(|c| !matches!(c, '*' | '#' | '_' | '`')).collect();
        let lower = plain.to_ascii_lowercase();
        if let Some(pos) = lower.find("verdict") {
            let rest = plain[pos + "verdict".len()..].trim_start_matches([':', '=', '-', ' ', '\t']);
            if let Some(v) = rest.split_whitespace().next().and_then(verdict_word) {
                verdict = Some(v);
                continue;
            }
        }
        if let Some(rest) = lower.trim_start().strip_prefix("target hint").or_else(|| lower.trim_start().strip_prefix("targethint")) {
            target_hint = hint_word(rest.trim_start_matches([':', ' ']));
            continue;
        }
        if let Some(b) = bullet(line) {
            if !b.is_empty() {
                suggestions.push(b.to_string());
            }
        }
    }
    verdict.map(|verdict| ReviewDraft { verdict, question_answers: Vec::new(), suggestions, target_hint })
}

/// Parses a reviewer reply: a JSON block with a `verdict` key if present,
/// otherwise a `Verdict: Pass|Reject` line followed by bullet suggestions.
///
/// A Reject without any failing question gets a synthetic failing
/// `overall` question; a verdict that contradicts its own answers is an
/// error.
pub fn parse_review(raw: &str) -> Result<ReviewDraft, String> {
    if raw.trim().is_empty() {
        return Err("empty reply".into());
    }
    let draft = match last_json_block(raw).map(|v| from_json(&v)).transpose()?.flatten() {
        Some(d) => d,
        None => from_text(raw).ok_or("no verdict found; state `Verdict: Pass` or `Verdict: Reject`")?,
    };
    let mut draft = draft;
    let failing = draft.question_answers.iter().filter(|q| !q.ok).count();
    match draft.verdict {
        Verdict::Pass if failing > 0 => {
            return Err(format!("verdict is Pass but {failing} question(s) are marked not ok"));
        }
        Verdict::Reject if failing == 0 => {
            if draft.question_answers.iter().any(|q| q.ok) && draft.suggestions.is_empty() {
                return Err("verdict is Reject but every question is marked ok and no suggestion is given".into());
            }
            draft.question_answers.push(QuestionAnswer {
                question: "overall".into(),
                answer: draft.suggestions.join("; "),
                ok: false,
            });
        }
        _ => {}
    }
    Ok(draft)
}
