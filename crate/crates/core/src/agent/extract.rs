//! Pulls structured blocks out of free-form model replies.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Fence<'a> {
    lang: &'a str,
    body: &'a str,
    end: usize,
}

/// Fenced blocks in order of appearance. An unterminated fence runs to the
/// end of the text.
fn fences(raw: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(rel) = raw[pos..].find("```") {
        let open = pos + rel;
        let after = open + 3;
        let line_end = raw[after..].find('\n').map(|i| after + i).unwrap_or(raw.len());
        let lang = raw[after..line_end].trim();
        let body_start = (line_end + 1).min(raw.len());
        let (body, end) = match raw[body_start..].find("```") {
            Some(i) => (&raw[body_start..body_start + i], body_start + i + 3),
            None => (&raw[body_start..], raw.len()),
        };
        out.push(Fence { lang, body, end });
        pos = end;
        if pos >= raw.len() {
            break;
        }
    }
    out
}

/// Index one past the brace matching the `{` or `[` at `start`, honouring
/// JSON string escapes.
fn balanced_end(raw: &str, start: usize) -> Option<usize> {
    let bytes = raw.as_bytes();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut esc = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            match b {
                _ if esc => esc = false,
                b'\\' => esc = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
                if depth < 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    None
}

/// The last well-formed JSON object (or array) in the reply, either inside a
/// fence or inline in prose. Returns `None` when there is none.
pub fn last_json_block(raw: &str) -> Option<Value> {
    let mut best: Option<(usize, Value)> = None;
    let mut consider = |end: usize, v: Value| {
        if best.as_ref().is_none_or(|(e, _)| end >= *e) {
            best = Some((end, v));
        }
    };
    for f in fences(raw) {
        if let Ok(v @ (Value::Object(_) | Value::Array(_))) = serde_json::from_str::<Value>(f.body.trim()) {
            consider(f.end, v);
        }
    }
    let bytes = raw.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = balanced_end(raw, i) {
                if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(&raw[i..end]) {
                    consider(end, v);
                    i = end;
                    continue;
                }
            }
        }
        i += 1;
    }
    best.map(|(_, v)| v)
}

/// Body of the last fenced code block that is not JSON. Blocks tagged with
/// a language other than python are skipped.
pub fn last_code_block(raw: &str) -> Option<String> {
    fences(raw)
        .into_iter()
        .rfind(|f| {
            matches!(f.lang.to_ascii_lowercase().as_str(), "" | "python" | "py" | "python3")
                && !f.body.trim().is_empty()
                && serde_json::from_str::<Value>(f.body.trim()).is_err()
        })
        .map(|f| f.body.trim_end().to_string())
}
