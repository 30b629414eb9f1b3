//! HTTP chat adapters.
//!
//! `generic` posts the request as-is (`{model, temperature,
//! max_output_tokens, messages}`) and expects `{text, input_tokens,
//! output_tokens}` back. `anthropic` and `openai` map to those providers'
//! native message schemas. The credential is read from the environment
//! variable named in the config on every call and is never stored.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{AgentBackend, BackendError, ChatRequest, ChatResponse, Part};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    Generic,
    Anthropic,
    Openai,
}

impl Provider {
    pub fn parse(s: &str) -> Option<Provider> {
        match s {
            "generic" => Some(Provider::Generic),
            "anthropic" => Some(Provider::Anthropic),
            "openai" => Some(Provider::Openai),
            _ => None,
        }
    }

    pub fn default_endpoint(self) -> Option<&'static str> {
        match self {
            Provider::Generic => None,
            Provider::Anthropic => Some("https://api.anthropic.com/v1/messages"),
            Provider::Openai => Some("https://api.openai.com/v1/chat/completions"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub provider: Provider,
    pub model: String,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

impl RemoteConfig {
    pub fn new(provider: Provider, model: &str) -> Self {
        RemoteConfig {
            provider,
            model: model.to_string(),
            endpoint: None,
            api_key_env: None,
            timeout_secs: 300,
        }
    }

    pub fn endpoint(&self) -> Result<String, BackendError> {
        self.endpoint
            .clone()
            .or_else(|| self.provider.default_endpoint().map(str::to_string))
            .ok_or_else(|| BackendError::Rejected("no endpoint configured".into()))
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteBackend { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn credential(&self) -> Result<Option<String>, BackendError> {
        match &self.config.api_key_env {
            None => Ok(None),
            Some(name) => std::env::var(name)
                .map(Some)
                .map_err(|_| BackendError::MissingCredential(name.clone())),
        }
    }
}

fn text_of(parts: &[Part]) -> String {
    parts
        .iter()
        .filter_map(|p| match p {
            Part::Text { text } => Some(text.as_str()),
            Part::Image { .. } => None,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Provider-native request body.
pub fn request_body(provider: Provider, req: &ChatRequest) -> Value {
    match provider {
        Provider::Generic => serde_json::to_value(req).expect("request serializes"),
        Provider::Anthropic => {
            let system: Vec<String> = req
                .messages
                .iter()
                .filter(|m| m.role == "system")
                .map(|m| text_of(&m.parts))
                .collect();
            let messages: Vec<Value> = req
                .messages
                .iter()
                .filter(|m| m.role != "system")
                .map(|m| {
                    let content: Vec<Value> = m
                        .parts
                        .iter()
                        .map(|p| match p {
                            Part::Text { text } => json!({"type": "text", "text": text}),
                            Part::Image { image } => json!({
                                "type": "image",
                                "source": {"type": "base64", "media_type": image.media_type, "data": image.base64}
                            }),
                        })
                        .collect();
                    json!({"role": m.role, "content": content})
                })
                .collect();
            let mut body = json!({
                "model": req.model_id,
                "max_tokens": req.max_output_tokens,
                "temperature": req.temperature,
                "messages": messages,
            });
            if !system.is_empty() {
                body["system"] = Value::String(system.join("\n\n"));
            }
            body
        }
        Provider::Openai => {
            let messages: Vec<Value> = req
                .messages
                .iter()
                .map(|m| {
                    if m.role == "system" {
                        return json!({"role": "system", "content": text_of(&m.parts)});
                    }
                    let content: Vec<Value> = m
                        .parts
                        .iter()
                        .map(|p| match p {
                            Part::Text { text } => json!({"type": "text", "text": text}),
                            Part::Image { image } => json!({
                                "type": "image_url",
                                "image_url": {"url": format!("data:{};base64,{}", image.media_type, image.base64)}
                            }),
                        })
                        .collect();
                    json!({"role": m.role, "content": content})
                })
                .collect();
            json!({
                "model": req.model_id,
                "temperature": req.temperature,
                "max_completion_tokens": req.max_output_tokens,
                "messages": messages,
            })
        }
    }
}

fn field_u64(v: &Value, path: &[&str]) -> u64 {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    cur.as_u64().unwrap_or(0)
}

/// Normalizes a provider response.
pub fn parse_response(provider: Provider, v: &Value) -> Result<ChatResponse, BackendError> {
    let bad = || BackendError::Rejected(format!("unexpected response shape: {v}"));
    match provider {
        Provider::Generic => Ok(ChatResponse {
            text: v["text"].as_str().ok_or_else(bad)?.to_string(),
            input_tokens: field_u64(v, &["input_tokens"]),
            output_tokens: field_u64(v, &["output_tokens"]),
        }),
        Provider::Anthropic => {
            let blocks = v["content"].as_array().ok_or_else(bad)?;
            let text = blocks
                .iter()
                .filter(|b| b["type"] == "text")
                .filter_map(|b| b["text"].as_str())
                .collect::<Vec<_>>()
                .join("");
            Ok(ChatResponse {
                text,
                input_tokens: field_u64(v, &["usage", "input_tokens"]),
                output_tokens: field_u64(v, &["usage", "output_tokens"]),
            })
        }
        Provider::Openai => Ok(ChatResponse {
            text: v["choices"][0]["message"]["content"]
                .as_str()
                .ok_or_else(bad)?
                .to_string(),
            input_tokens: field_u64(v, &["usage", "prompt_tokens"]),
            output_tokens: field_u64(v, &["usage", "completion_tokens"]),
        }),
    }
}

impl AgentBackend for RemoteBackend {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let url = self.config.endpoint()?;
        let key = self.credential()?;
        let mut req = request.clone();
        req.model_id = self.config.model.clone();
        let body = request_body(self.config.provider, &req);
        let mut call = self.agent.post(&url).header("content-type", "application/json");
        match (self.config.provider, &key) {
            (Provider::Anthropic, Some(k)) => {
                call = call.header("x-api-key", k).header("anthropic-version", "2023-06-01");
            }
            (Provider::Anthropic, None) => call = call.header("anthropic-version", "2023-06-01"),
            (_, Some(k)) => call = call.header("authorization", format!("Bearer {k}")),
            (_, None) => {}
        }
        let mut resp = call
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(BackendError::Rejected(format!("HTTP {status}: {text}")));
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| BackendError::Rejected(e.to_string()))?;
        parse_response(self.config.provider, &value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agentloop::backend::{chat_with_retry, AgentRole, ImageData, Message, RetryPolicy};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serves one canned `(status, body)` per connection and reports each
    /// request's headers and body.
    fn fake_server(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/chat", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut headers = String::new();
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    headers.push_str(&line);
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                tx.send((headers, String::from_utf8(buf).unwrap())).unwrap();
                let mut out = stream;
                write!(
                    out,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (url, rx)
    }

    fn request() -> ChatRequest {
        ChatRequest::new(
            "ignored",
            AgentRole::Planner,
            vec![
                Message::system("be brief"),
                Message::user(vec![
                    Part::Text { text: "hello".into() },
                    Part::Image {
                        image: ImageData {
                            media_type: "image/png".into(),
                            base64: "AAAA".into(),
                        },
                    },
                ]),
            ],
        )
    }

    #[test]
    fn generic_round_trip_with_credential() {
        let (url, rx) = fake_server(vec![(
            200,
            r#"{"text":"plan","input_tokens":12,"output_tokens":3}"#.into(),
        )]);
        std::env::set_var("PHYSCAD_TEST_KEY_GENERIC", "sekret");
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint: Some(url),
            api_key_env: Some("PHYSCAD_TEST_KEY_GENERIC".into()),
            ..RemoteConfig::new(Provider::Generic, "model-a")
        });
        let r = backend.chat(&request()).unwrap();
        assert_eq!(
            r,
            ChatResponse {
                text: "plan".into(),
                input_tokens: 12,
                output_tokens: 3
            }
        );
        let (headers, body) = rx.recv().unwrap();
        assert!(headers.to_ascii_lowercase().contains("authorization: bearer sekret"));
        let body: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(body["model"], "model-a");
        assert_eq!(body["temperature"], 0.5);
        assert_eq!(body["max_output_tokens"], 4096);
        assert_eq!(body["messages"][1]["parts"][1]["image"]["media_type"], "image/png");
    }

    #[test]
    fn server_errors_are_retried() {
        let (url, _rx) = fake_server(vec![
            (503, "{}".into()),
            (200, r#"{"text":"ok","input_tokens":1,"output_tokens":1}"#.into()),
        ]);
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint: Some(url),
            ..RemoteConfig::new(Provider::Generic, "m")
        });
        let r = chat_with_retry(&backend, &request(), &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(r.text, "ok");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, _rx) = fake_server(vec![(401, r#"{"error":"bad key"}"#.into())]);
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint: Some(url),
            ..RemoteConfig::new(Provider::Generic, "m")
        });
        let e = chat_with_retry(&backend, &request(), &RetryPolicy::immediate(3)).unwrap_err();
        assert_eq!(e.attempts, 1);
        assert!(matches!(e.last, BackendError::Rejected(_)));
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint: Some(format!("http://127.0.0.1:{port}/x")),
            timeout_secs: 5,
            ..RemoteConfig::new(Provider::Generic, "m")
        });
        let e = chat_with_retry(&backend, &request(), &RetryPolicy::immediate(2)).unwrap_err();
        assert_eq!(e.attempts, 3);
    }

    #[test]
    fn missing_credential_is_reported() {
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint: Some("http://127.0.0.1:9/".into()),
            api_key_env: Some("PHYSCAD_TEST_KEY_UNSET".into()),
            ..RemoteConfig::new(Provider::Openai, "m")
        });
        assert_eq!(
            backend.chat(&request()).unwrap_err(),
            BackendError::MissingCredential("PHYSCAD_TEST_KEY_UNSET".into())
        );
    }

    #[test]
    fn anthropic_schema() {
        let body = request_body(Provider::Anthropic, &request());
        assert_eq!(body["system"], "be brief");
        assert_eq!(body["max_tokens"], 4096);
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["content"][1]["source"]["data"], "AAAA");
        let resp = json!({"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}],"usage":{"input_tokens":5,"output_tokens":2}});
        let r = parse_response(Provider::Anthropic, &resp).unwrap();
        assert_eq!((r.text.as_str(), r.input_tokens, r.output_tokens), ("ab", 5, 2));
    }

    #[test]
    fn anthropic_headers_over_http() {
        let (url, rx) = fake_server(vec![(
            200,
            r#"{"content":[{"type":"text","text":"hi"}],"usage":{"input_tokens":7,"output_tokens":1}}"#.into(),
        )]);
        std::env::set_var("PHYSCAD_TEST_KEY_ANTHROPIC", "k1");
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint: Some(url),
            api_key_env: Some("PHYSCAD_TEST_KEY_ANTHROPIC".into()),
            ..RemoteConfig::new(Provider::Anthropic, "claude-x")
        });
        assert_eq!(backend.chat(&request()).unwrap().text, "hi");
        let (headers, _) = rx.recv().unwrap();
        let h = headers.to_ascii_lowercase();
        assert!(h.contains("x-api-key: k1"));
        assert!(h.contains("anthropic-version: 2023-06-01"));
    }

    #[test]
    fn openai_schema() {
        let body = request_body(Provider::Openai, &request());
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(
            body["messages"][1]["content"][1]["image_url"]["url"],
            "data:image/png;base64,AAAA"
        );
        let resp = json!({"choices":[{"message":{"content":"x"}}],"usage":{"prompt_tokens":9,"completion_tokens":4}});
        let r = parse_response(Provider::Openai, &resp).unwrap();
        assert_eq!((r.input_tokens, r.output_tokens), (9, 4));
        assert!(parse_response(Provider::Openai, &json!({})).is_err());
    }
}
