//! Chat-completions wire protocol.

use std::time::Duration;

use serde_json::{json, Value};

/// One user-turn completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u64,
}

impl ChatRequest {
    /// JSON body in chat-completions format.
    pub fn to_json(&self) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": self.prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    pub tokens_in: Option<u64>,
    pub tokens_out: Option<u64>,
}

impl ChatResponse {
    /// Reads `choices[0].message.content` and `usage`.
    pub fn from_json(v: &Value) -> Result<Self, String> {
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())?;
        Ok(ChatResponse {
            content: content.to_string(),
            tokens_in: v.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
            tokens_out: v.pointer("/usage/completion_tokens").and_then(Value::as_u64),
        })
    }
}

/// Anything that can answer a chat request. Errors are transport-level
/// messages; the caller decides whether to retry.
pub trait ChatClient: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, String>;
}

/// Blocking HTTP client for an OpenAI-compatible endpoint.
pub struct HttpChatClient {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        HttpChatClient {
            endpoint: endpoint.into(),
            api_key,
            agent,
        }
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, String> {
        let mut call = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send(req.to_json().to_string())
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        if !status.is_success() {
            let snippet: String = body.chars().take(200).collect();
            return Err(format!("HTTP {status}: {snippet}"));
        }
        let v: Value = serde_json::from_str(&body).map_err(|e| format!("invalid JSON body: {e}"))?;
        ChatResponse::from_json(&v)
    }
}
