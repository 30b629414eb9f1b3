//! Chat request/response types, the backend trait, the scripted mock and
//! bounded retries.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Planner,
    Engineer,
    GeometryReviewer,
    StructuralReviewer,
}

impl AgentRole {
    pub fn label(self) -> &'static str {
        match self {
            AgentRole::Planner => "planner",
            AgentRole::Engineer => "engineer",
            AgentRole::GeometryReviewer => "geometry_reviewer",
            AgentRole::StructuralReviewer => "structural_reviewer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Part {
    Text { text: String },
    Image { image: ImageData },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageData {
    pub media_type: String,
    /// Base64 without a data-URL prefix.
    pub base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    /// `system` or `user`.
    pub role: String,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            parts: vec![Part::Text { text: text.into() }],
        }
    }

    pub fn user(parts: Vec<Part>) -> Self {
        Message {
            role: "user".into(),
            parts,
        }
    }

    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn image_count(&self) -> usize {
        self.parts.iter().filter(|p| matches!(p, Part::Image { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    #[serde(rename = "model")]
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub messages: Vec<Message>,
    /// Which agent is speaking; not part of the wire body.
    #[serde(skip, default = "default_role")]
    pub agent: AgentRole,
    #[serde(skip)]
    pub disable_thinking: bool,
}

fn default_role() -> AgentRole {
    AgentRole::Engineer
}

impl ChatRequest {
    pub fn new(model_id: &str, agent: AgentRole, messages: Vec<Message>) -> Self {
        ChatRequest {
            model_id: model_id.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            messages,
            agent,
            disable_thinking: false,
        }
    }

    /// All text parts of all messages.
    pub fn text(&self) -> String {
        self.messages.iter().map(Message::text).collect::<Vec<_>>().join("\n")
    }

    pub fn image_count(&self) -> usize {
        self.messages.iter().map(Message::image_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Connection failure, timeout or a retryable HTTP status.
    #[error("transport error: {0}")]
    Transport(String),
    /// A response that will not improve on retry (bad credentials, schema).
    #[error("backend rejected the request: {0}")]
    Rejected(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// Returned after the retry budget is exhausted; the run is recorded as an
/// infrastructure failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("backend unavailable after {attempts} attempts: {last}")]
pub struct BackendUnavailable {
    pub attempts: usize,
    pub last: BackendError,
}

pub trait AgentBackend: Send + Sync {
    /// Identifier recorded in RunRecords.
    fn model_id(&self) -> &str;
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub retries: usize,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            base_delay_ms: 500,
        }
    }
}

impl RetryPolicy {
    pub fn immediate(retries: usize) -> Self {
        RetryPolicy {
            retries,
            base_delay_ms: 0,
        }
    }

    fn delay(&self, attempt: usize) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << attempt.min(16)))
    }
}

/// Calls the backend, retrying transport errors with exponential backoff.
pub fn chat_with_retry(
    backend: &dyn AgentBackend,
    request: &ChatRequest,
    policy: &RetryPolicy,
) -> Result<ChatResponse, BackendUnavailable> {
    let mut attempt = 0;
    loop {
        match backend.chat(request) {
            Ok(r) => return Ok(r),
            Err(e) if e.is_retryable() && attempt < policy.retries => {
                std::thread::sleep(policy.delay(attempt));
                attempt += 1;
            }
            Err(e) => {
                return Err(BackendUnavailable {
                    attempts: attempt + 1,
                    last: e,
                })
            }
        }
    }
}

/// Deterministic token estimate used by the scripted backend: one token per
/// four characters, rounded up, plus a flat charge per image.
pub fn estimate_tokens(text: &str, images: usize) -> u64 {
    (text.chars().count() as u64).div_ceil(4) + 256 * images as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scripted {
    Reply(String),
    /// One transport failure.
    TransportError,
}

#[derive(Debug, Default)]
struct ScriptState {
    queues: HashMap<AgentRole, VecDeque<Scripted>>,
    last: HashMap<AgentRole, String>,
    requests: Vec<ChatRequest>,
    responses: Vec<ChatResponse>,
}

/// Replays fixed responses per role. When a role's queue is empty its last
/// reply repeats; a role with no script answers `VERDICT: PASS`.
#[derive(Debug)]
pub struct ScriptedBackend {
    model_id: String,
    state: Mutex<ScriptState>,
}

impl ScriptedBackend {
    pub fn new(model_id: &str) -> Self {
        ScriptedBackend {
            model_id: model_id.to_string(),
            state: Mutex::new(ScriptState::default()),
        }
    }

    pub fn script(self, role: AgentRole, replies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        {
            let mut s = self.state.lock().unwrap();
            let q = s.queues.entry(role).or_default();
            q.extend(replies.into_iter().map(|r| Scripted::Reply(r.into())));
        }
        self
    }

    pub fn push(&self, role: AgentRole, item: Scripted) {
        self.state
            .lock()
            .unwrap()
            .queues
            .entry(role)
            .or_default()
            .push_back(item);
    }

    /// Every request received so far, in order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.state.lock().unwrap().requests.clone()
    }

    pub fn responses(&self) -> Vec<ChatResponse> {
        self.state.lock().unwrap().responses.clone()
    }

    pub fn prompts_for(&self, role: AgentRole) -> Vec<String> {
        self.requests()
            .iter()
            .filter(|r| r.agent == role)
            .map(ChatRequest::text)
            .collect()
    }
}

impl AgentBackend for ScriptedBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut s = self.state.lock().unwrap();
        s.requests.push(request.clone());
        let next = s.queues.get_mut(&request.agent).and_then(VecDeque::pop_front);
        let text = match next {
            Some(Scripted::TransportError) => return Err(BackendError::Transport("scripted transport failure".into())),
            Some(Scripted::Reply(t)) => t,
            None => s
                .last
                .get(&request.agent)
                .cloned()
                .unwrap_or_else(|| "VERDICT: PASS".to_string()),
        };
        s.last.insert(request.agent, text.clone());
        let response = ChatResponse {
            input_tokens: estimate_tokens(&request.text(), request.image_count()),
            output_tokens: estimate_tokens(&text, 0),
            text,
        };
        s.responses.push(response.clone());
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(role: AgentRole) -> ChatRequest {
        ChatRequest::new(
            "m",
            role,
            vec![Message::user(vec![Part::Text {
                text: "abcdefgh".into(),
            }])],
        )
    }

    #[test]
    fn defaults_match_protocol() {
        let r = req(AgentRole::Planner);
        assert_eq!(r.temperature, 0.5);
        assert_eq!(r.max_output_tokens, 4096);
        let wire = serde_json::to_value(&r).unwrap();
        assert_eq!(wire["model"], "m");
        assert_eq!(wire["messages"][0]["parts"][0]["text"], "abcdefgh");
        assert!(wire.get("agent").is_none());
    }

    #[test]
    fn scripted_replays_then_repeats() {
        let b = ScriptedBackend::new("mock").script(AgentRole::Planner, ["one", "two"]);
        let texts: Vec<String> = (0..3).map(|_| b.chat(&req(AgentRole::Planner)).unwrap().text).collect();
        assert_eq!(texts, ["one", "two", "two"]);
        assert_eq!(b.chat(&req(AgentRole::GeometryReviewer)).unwrap().text, "VERDICT: PASS");
        let r = &b.responses()[0];
        assert_eq!((r.input_tokens, r.output_tokens), (2, 1));
        assert_eq!(b.prompts_for(AgentRole::Planner).len(), 3);
    }

    #[test]
    fn retries_then_gives_up() {
        let b = ScriptedBackend::new("mock").script(AgentRole::Engineer, ["ok"]);
        for _ in 0..2 {
            b.push(AgentRole::Engineer, Scripted::TransportError);
        }
        // the first reply is consumed before the failures
        assert_eq!(
            chat_with_retry(&b, &req(AgentRole::Engineer), &RetryPolicy::immediate(3))
                .unwrap()
                .text,
            "ok"
        );
        assert_eq!(
            chat_with_retry(&b, &req(AgentRole::Engineer), &RetryPolicy::immediate(3))
                .unwrap()
                .text,
            "ok"
        );
        assert_eq!(b.requests().len(), 4);

        let down = ScriptedBackend::new("mock");
        for _ in 0..4 {
            down.push(AgentRole::Engineer, Scripted::TransportError);
        }
        let err = chat_with_retry(&down, &req(AgentRole::Engineer), &RetryPolicy::immediate(3)).unwrap_err();
        assert_eq!(err.attempts, 4);
        assert_eq!(down.requests().len(), 4);
    }
}
