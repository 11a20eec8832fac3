//! Chat-completion backends.
//!
//! Requests reference keyframe images by file and content hash; the HTTP
//! backend reads and base64-encodes them when building the wire payload,
//! so recorded exchanges stay small and never carry raw pixels.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    Image { path: PathBuf, media_type: String, sha256: String },
}

impl ContentPart {
    pub fn text(t: impl Into<String>) -> Self {
        ContentPart::Text { text: t.into() }
    }

    /// Reads the file once to fingerprint it.
    pub fn image(path: &Path) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        let media_type = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jpg" | "jpeg") => "image/jpeg",
            Some("webp") => "image/webp",
            _ => "image/png",
        };
        Ok(ContentPart::Image {
            path: path.to_path_buf(),
            media_type: media_type.into(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: MessageRole,
    pub content: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: MessageRole::System, content: vec![ContentPart::text(text)] }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: MessageRole::User, content: vec![ContentPart::text(text)] }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: MessageRole::Assistant, content: vec![ContentPart::text(text)] }
    }

    /// Concatenated text parts.
    pub fn text(&self) -> String {
        self.content
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text { text } => Some(text.as_str()),
                ContentPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// Content hash that ignores image file locations, so a request built
    /// from copied frames hashes the same.
    pub fn hash(&self) -> String {
        let messages: Vec<_> = self
            .messages
            .iter()
            .map(|m| {
                let parts: Vec<_> = m
                    .content
                    .iter()
                    .map(|p| match p {
                        ContentPart::Text { text } => json!({"text": text}),
                        ContentPart::Image { sha256, .. } => json!({"image": sha256}),
                    })
                    .collect();
                json!({"role": m.role, "content": parts})
            })
            .collect();
        let canonical = json!({"model": self.model, "temperature": self.temperature, "messages": messages});
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    pub fn has_images(&self) -> bool {
        self.messages.iter().any(|m| m.content.iter().any(|p| matches!(p, ContentPart::Image { .. })))
    }

    /// Text of the last user message.
    pub fn last_user_text(&self) -> String {
        self.messages.iter().rev().find(|m| m.role == MessageRole::User).map(ChatMessage::text).unwrap_or_default()
    }

    /// All text of the conversation, in order.
    pub fn full_text(&self) -> String {
        self.messages.iter().map(ChatMessage::text).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Option<Usage>,
    /// Transport attempts used, including retries.
    pub attempts: u32,
}

impl ChatResponse {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into(), usage: None, attempts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unreachable after {attempts} attempt(s): {message}")]
    Unreachable { attempts: u32, message: String },
    #[error("rate limited on all {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("backend answered HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("no fixture for request {hash} and the scripted sequence is exhausted")]
    NoFixture { hash: String },
    #[error("image attachment {path}: {message}")]
    Attachment { path: PathBuf, message: String },
}

/// A chat-completion provider. Implementations are shared across sessions
/// and must tolerate concurrent calls.
pub trait ChatBackend: Send + Sync {
    fn id(&self) -> String;
    fn supports_images(&self) -> bool;
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

/// Exponential backoff for transient transport failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_delay_ms: u64,
    pub max_delay_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, initial_delay_ms: 500, max_delay_ms: 8_000, multiplier: 2.0 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (attempts are 1-based).
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let ms = self.initial_delay_ms as f64 * self.multiplier.powi(attempt.saturating_sub(1) as i32);
        Duration::from_millis(ms.min(self.max_delay_ms as f64) as u64)
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    images: bool,
}

impl HttpChatBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, retry: RetryPolicy, images: bool) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .expect("http client builds");
        Self { client, base_url: base_url.into(), api_key, retry, images }
    }

    /// Wire payload with images inlined as data URLs.
    pub fn wire_payload(request: &ChatRequest) -> Result<serde_json::Value, BackendError> {
        let b64 = base64::engine::general_purpose::STANDARD;
        let mut messages = Vec::with_capacity(request.messages.len());
        for m in &request.messages {
            let mut parts = Vec::with_capacity(m.content.len());
            for p in &m.content {
                parts.push(match p {
                    ContentPart::Text { text } => json!({"type": "text", "text": text}),
                    ContentPart::Image { path, media_type, .. } => {
                        let bytes = fs::read(path)
                            .map_err(|e| BackendError::Attachment { path: path.clone(), message: e.to_string() })?;
                        json!({
                            "type": "image_url",
                            "image_url": {"url": format!("data:{media_type};base64,{}", b64.encode(bytes))}
                        })
                    }
                });
            }
            messages.push(json!({"role": m.role, "content": parts}));
        }
        Ok(json!({"model": request.model, "temperature": request.temperature, "messages": messages}))
    }

    fn parse_body(body: &str) -> Result<(String, Option<Usage>), BackendError> {
        #[derive(Deserialize)]
        struct Body {
            choices: Vec<Choice>,
            #[serde(default)]
            usage: Option<Usage>,
        }
        #[derive(Deserialize)]
        struct Choice {
            message: Msg,
        }
        #[derive(Deserialize)]
        struct Msg {
            #[serde(default)]
            content: Option<String>,
        }
        let b: Body = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let text = b
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no message content in first choice".into()))?;
        Ok((text, b.usage))
    }
}

impl ChatBackend for HttpChatBackend {
    fn id(&self) -> String {
        format!("http:{}", self.base_url)
    }

    fn supports_images(&self) -> bool {
        self.images
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let payload = Self::wire_payload(request)?;
        let max = self.retry.max_attempts.max(1);
        let mut last_transport = String::new();
        let mut rate_limited = false;
        for attempt in 1..=max {
            let mut req = self.client.post(&url).json(&payload);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let body = resp.text().unwrap_or_default();
                    match status {
                        200..=299 => {
                            let (text, usage) = Self::parse_body(&body)?;
                            return Ok(ChatResponse { text, usage, attempts: attempt });
                        }
                        429 => {
                            rate_limited = true;
                            tracing::warn!(attempt, "chat backend rate limited");
                        }
                        500..=599 => {
                            rate_limited = false;
                            last_transport = format!("HTTP {status}: {body}");
                            tracing::warn!(attempt, status, "chat backend server error");
                        }
                        _ => return Err(BackendError::Http { status, body }),
                    }
                }
                Err(e) => {
                    rate_limited = false;
                    last_transport = e.to_string();
                    tracing::warn!(attempt, error = %e, "chat backend transport error");
                }
            }
            if attempt < max {
                thread::sleep(self.retry.delay_after(attempt));
            }
        }
        if rate_limited {
            Err(BackendError::RateLimited { attempts: max })
        } else {
            Err(BackendError::Unreachable { attempts: max, message: last_transport })
        }
    }
}

/// Replies from a fixture directory: `<request-hash>.txt` files answer
/// matching requests; anything else is served in order from the optional
/// `sequence.json` array.
pub struct FixtureBackend {
    dir: PathBuf,
    sequence: Mutex<VecDeque<String>>,
}

impl FixtureBackend {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        let seq_path = dir.join("sequence.json");
        let sequence = match fs::read_to_string(&seq_path) {
            Ok(t) => serde_json::from_str::<Vec<String>>(&t)
                .map_err(|e| BackendError::Malformed(format!("{}: {e}", seq_path.display())))?,
            Err(_) => Vec::new(),
        };
        Ok(Self { dir, sequence: Mutex::new(sequence.into()) })
    }
}

impl ChatBackend for FixtureBackend {
    fn id(&self) -> String {
        format!("fixtures:{}", self.dir.display())
    }

    fn supports_images(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let hash = request.hash();
        if let Ok(text) = fs::read_to_string(self.dir.join(format!("{hash}.txt"))) {
            return Ok(ChatResponse::new(text));
        }
        self.sequence
            .lock()
            .expect("fixture lock")
            .pop_front()
            .map(ChatResponse::new)
            .ok_or(BackendError::NoFixture { hash })
    }
}

/// Ordered canned replies, for tests and replay.
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<Result<String, BackendError>>>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(replies.into_iter().map(|r| Ok(r.into())))
    }

    pub fn with_results(replies: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        Self { replies: Mutex::new(replies.into_iter().collect()), seen: Mutex::new(Vec::new()) }
    }

    /// Requests received so far.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().expect("scripted lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("scripted lock").len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn supports_images(&self) -> bool {
        true
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.seen.lock().expect("scripted lock").push(request.clone());
        match self.replies.lock().expect("scripted lock").pop_front() {
            Some(r) => r.map(ChatResponse::new),
            None => Err(BackendError::NoFixture { hash: request.hash() }),
        }
    }
}

/// Backend answering through a closure.
pub struct FnBackend<F> {
    f: F,
    images: bool,
}

impl<F> FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f, images: true }
    }
}

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync,
{
    fn id(&self) -> String {
        "fn".into()
    }

    fn supports_images(&self) -> bool {
        self.images
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (self.f)(request).map(ChatResponse::new)
    }
}

/// Times a backend call.
pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_millis() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn request() -> ChatRequest {
        ChatRequest { model: "m".into(), temperature: 0.2, messages: vec![ChatMessage::user("hi")] }
    }

    /// Serves one canned HTTP response per connection, in order, and
    /// records request bodies.
    fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (format!("http://{addr}/v1"), handle)
    }

    fn fast_retry(max_attempts: u32) -> RetryPolicy {
        RetryPolicy { max_attempts, initial_delay_ms: 1, max_delay_ms: 2, multiplier: 2.0 }
    }

    const OK_BODY: &str = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#;

    #[test]
    fn rate_limit_then_success_takes_two_attempts() {
        let (url, h) = serve(vec![(429, "{}".into()), (200, OK_BODY.into())]);
        let backend = HttpChatBackend::new(url, Some("k".into()), fast_retry(3), true);
        let resp = backend.complete(&request()).unwrap();
        assert_eq!(resp.text, "hello");
        assert_eq!(resp.attempts, 2);
        assert_eq!(resp.usage, Some(Usage { prompt_tokens: 3, completion_tokens: 1 }));
        let bodies = h.join().unwrap();
        let wire: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(wire["messages"][0]["role"], "user");
        assert_eq!(wire["messages"][0]["content"][0]["type"], "text");
    }

    #[test]
    fn persistent_rate_limit_is_reported() {
        let (url, h) = serve(vec![(429, "{}".into()), (429, "{}".into())]);
        let backend = HttpChatBackend::new(url, None, fast_retry(2), false);
        assert_eq!(backend.complete(&request()).unwrap_err(), BackendError::RateLimited { attempts: 2 });
        h.join().unwrap();
    }

    #[test]
    fn unreachable_endpoint_after_bounded_retries() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let backend = HttpChatBackend::new(format!("http://127.0.0.1:{port}"), None, fast_retry(3), false);
        match backend.complete(&request()).unwrap_err() {
            BackendError::Unreachable { attempts, .. } => assert_eq!(attempts, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, h) = serve(vec![(401, "nope".into())]);
        let backend = HttpChatBackend::new(url, None, fast_retry(3), false);
        assert!(matches!(backend.complete(&request()).unwrap_err(), BackendError::Http { status: 401, .. }));
        h.join().unwrap();
    }

    #[test]
    fn images_inline_as_data_urls_but_hash_by_content() {
        let tmp = tempfile::tempdir().unwrap();
        let a = tmp.path().join("a.png");
        let b = tmp.path().join("b.png");
        fs::write(&a, b"\x89PNG fake").unwrap();
        fs::write(&b, b"\x89PNG fake").unwrap();
        let mk = |p: &Path| ChatRequest {
            model: "m".into(),
            temperature: 0.0,
            messages: vec![ChatMessage {
                role: MessageRole::User,
                content: vec![ContentPart::text("look"), ContentPart::image(p).unwrap()],
            }],
        };
        assert_eq!(mk(&a).hash(), mk(&b).hash());
        let wire = HttpChatBackend::wire_payload(&mk(&a)).unwrap();
        let url = wire["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
        assert!(!wire.to_string().contains("a.png"));
    }

    #[test]
    fn fixture_backend_prefers_hash_then_sequence() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join(format!("{}.txt", request().hash())), "canned").unwrap();
        fs::write(tmp.path().join("sequence.json"), r#"["first", "second"]"#).unwrap();
        let b = FixtureBackend::open(tmp.path()).unwrap();
        assert_eq!(b.complete(&request()).unwrap().text, "canned");
        let other = ChatRequest { model: "other".into(), ..request() };
        assert_eq!(b.complete(&other).unwrap().text, "first");
        assert_eq!(b.complete(&other).unwrap().text, "second");
        assert!(matches!(b.complete(&other), Err(BackendError::NoFixture { .. })));
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy { max_attempts: 5, initial_delay_ms: 100, max_delay_ms: 350, multiplier: 2.0 };
        assert_eq!(p.delay_after(1), Duration::from_millis(100));
        assert_eq!(p.delay_after(2), Duration::from_millis(200));
        assert_eq!(p.delay_after(3), Duration::from_millis(350));
    }
}
