//! Chat-completions plumbing shared by the summarizer, the synthesis
//! prompts, judges, and the agent's model endpoint.

use std::collections::VecDeque;
use std::time::Duration;

use parking_lot::Mutex;
use serde_json::{Value, json};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChatError {
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("no scripted reply left")]
    Exhausted,
    #[error("{0}")]
    Scripted(String),
}

/// Single-shot text completion: system prompt + user prompt in, text out.
pub trait ChatClient: Send + Sync {
    fn chat(&self, system: &str, user: &str) -> Result<String, ChatError>;
}

/// Replays canned replies in order. `Err` entries simulate endpoint failures.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    replies: Mutex<VecDeque<Result<String, String>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedChat {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(|s| Ok(s.into())).collect()),
            prompts: Mutex::default(),
        }
    }

    pub fn failing(message: impl Into<String>) -> Self {
        Self {
            replies: Mutex::new(VecDeque::from([Err(message.into())])),
            prompts: Mutex::default(),
        }
    }

    pub fn push(&self, reply: impl Into<String>) {
        self.replies.lock().push_back(Ok(reply.into()));
    }

    /// User prompts received so far.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().clone()
    }
}

impl ChatClient for ScriptedChat {
    fn chat(&self, _system: &str, user: &str) -> Result<String, ChatError> {
        self.prompts.lock().push(user.to_string());
        match self.replies.lock().pop_front() {
            Some(Ok(s)) => Ok(s),
            Some(Err(e)) => Err(ChatError::Scripted(e)),
            None => Err(ChatError::Exhausted),
        }
    }
}

/// Client for any OpenAI-compatible `/chat/completions` endpoint.
#[derive(Clone)]
pub struct OpenAiCompatClient {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    temperature: Option<f64>,
    agent: ureq::Agent,
}

impl std::fmt::Debug for OpenAiCompatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiCompatClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl OpenAiCompatClient {
    pub fn new(base_url: &str, api_key: Option<String>, model: impl Into<String>) -> Self {
        let base = base_url.trim_end_matches('/');
        let endpoint = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(600)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint,
            api_key,
            model: model.into(),
            temperature: None,
            agent,
        }
    }

    /// Reads `<url_var>`, `<key_var>` and `MODEL_NAME` from the environment.
    pub fn from_env(url_var: &str, key_var: &str) -> Option<Self> {
        let url = std::env::var(url_var).ok().filter(|s| !s.is_empty())?;
        let key = std::env::var(key_var).ok().filter(|s| !s.is_empty());
        let model = std::env::var("MODEL_NAME").unwrap_or_else(|_| "default".to_string());
        Some(Self::new(&url, key, model))
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = Some(t);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Posts a request body (model and temperature are filled in) and returns
    /// the first choice's `message` object.
    pub fn complete(&self, mut body: Value) -> Result<Value, ChatError> {
        body["model"] = json!(self.model);
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string().as_bytes())
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ChatError::Http { status, body: text });
        }
        parse_first_message(&text)
    }
}

pub(crate) fn parse_first_message(text: &str) -> Result<Value, ChatError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ChatError::Protocol(e.to_string()))?;
    value
        .pointer("/choices/0/message")
        .cloned()
        .ok_or_else(|| ChatError::Protocol("response has no choices[0].message".into()))
}

impl ChatClient for OpenAiCompatClient {
    fn chat(&self, system: &str, user: &str) -> Result<String, ChatError> {
        let message = self.complete(json!({
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ]
        }))?;
        message
            .get("content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ChatError::Protocol("message has no text content".into()))
    }
}
