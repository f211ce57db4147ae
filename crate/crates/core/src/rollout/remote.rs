//! Chat-completion backend over HTTP.
//!
//! Sends `model`, `messages`, `temperature`, `max_tokens` and `stop` to an
//! OpenAI-compatible endpoint. The prompt is the user message; the partial
//! transcript, when present, is sent as a trailing assistant message for the
//! server to continue.

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::backend::{BackendError, FinishReason, Generation, GenerationRequest, ModelBackend};
use crate::query::Phase;

pub const ENV_ENDPOINT: &str = "GS_MODEL_ENDPOINT";
pub const ENV_MODEL: &str = "GS_MODEL_NAME";
pub const ENV_API_KEY: &str = "GS_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(300),
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let var = |name: &str| {
            std::env::var(name)
                .ok()
                .filter(|v| !v.trim().is_empty())
        };
        let endpoint = var(ENV_ENDPOINT)
            .ok_or_else(|| BackendError::Protocol(format!("{ENV_ENDPOINT} is not set")))?;
        let model =
            var(ENV_MODEL).ok_or_else(|| BackendError::Protocol(format!("{ENV_MODEL} is not set")))?;
        let mut cfg = RemoteConfig::new(endpoint, model);
        cfg.api_key = var(ENV_API_KEY);
        Ok(cfg)
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

pub struct RemoteBackend {
    cfg: RemoteConfig,
    agent: ureq::Agent,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Option<ChatMessage>,
    /// Plain completion servers return `text` instead of `message`.
    text: Option<String>,
    finish_reason: Option<String>,
    /// vLLM-style: the stop string that ended generation.
    #[serde(default)]
    stop_reason: Option<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    content: Option<String>,
    #[serde(default)]
    refusal: Option<String>,
}

enum Attempt {
    Retry(BackendError),
    Fail(BackendError),
}

impl RemoteBackend {
    pub fn new(cfg: RemoteConfig) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(cfg.timeout))
            .build();
        RemoteBackend {
            agent: ureq::Agent::new_with_config(config),
            cfg,
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        Ok(Self::new(RemoteConfig::from_env()?))
    }

    fn body(&self, request: &GenerationRequest<'_>) -> serde_json::Value {
        let mut messages = vec![json!({"role": "user", "content": request.prompt})];
        if !request.transcript.is_empty() {
            messages.push(json!({"role": "assistant", "content": request.transcript}));
        }
        json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stop": request.stop,
        })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<Generation, Attempt> {
        let mut req = self.agent.post(&self.cfg.url());
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Attempt::Retry(BackendError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(BackendError::Transport(e.to_string())))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => {
                return Err(Attempt::Retry(BackendError::Transport(format!(
                    "HTTP {status}: {}",
                    snippet(&text)
                ))))
            }
            _ => {
                return Err(Attempt::Fail(BackendError::Refusal(format!(
                    "HTTP {status}: {}",
                    snippet(&text)
                ))))
            }
        }
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fail(BackendError::Protocol(format!("bad response body: {e}"))))?;
        interpret(parsed).map_err(Attempt::Fail)
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(200).collect()
}

fn interpret(resp: ChatResponse) -> Result<Generation, BackendError> {
    let choice = resp
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;
    if let Some(refusal) = choice.message.as_ref().and_then(|m| m.refusal.clone()) {
        return Err(BackendError::Refusal(refusal));
    }
    let mut text = choice
        .message
        .and_then(|m| m.content)
        .or(choice.text)
        .unwrap_or_default();
    let close = Phase::Search.close_tag();
    let hit_stop_string = matches!(&choice.stop_reason, Some(serde_json::Value::String(s)) if s == close);
    match choice.finish_reason.as_deref() {
        Some("length") => return Err(BackendError::Length),
        Some("content_filter") => return Err(BackendError::Refusal("content filtered".into())),
        _ => {}
    }
    // Servers strip the matched stop string; an unclosed trailing <search>
    // means generation halted on it.
    let open_search = match (text.rfind(Phase::Search.open_tag()), text.rfind(close)) {
        (Some(o), Some(c)) => o > c,
        (Some(_), None) => true,
        _ => false,
    };
    if hit_stop_string || open_search || text.ends_with(close) {
        if !text.ends_with(close) {
            text.push_str(close);
        }
        return Ok(Generation::from_raw(&text));
    }
    Ok(Generation {
        text,
        finish: FinishReason::EndOfSequence,
    })
}

impl ModelBackend for RemoteBackend {
    fn generate(&self, request: &GenerationRequest<'_>) -> Result<Generation, BackendError> {
        let body = self.body(request);
        let mut backoff = self.cfg.initial_backoff;
        let attempts = self.cfg.attempts.max(1);
        let mut last = BackendError::Transport("no attempt made".into());
        for i in 0..attempts {
            match self.attempt(&body) {
                Ok(g) => return Ok(g),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("backend attempt {} of {attempts} failed: {e}", i + 1);
                    last = e;
                    if i + 1 < attempts {
                        thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(last)
    }
}
