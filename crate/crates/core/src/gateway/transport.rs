//! Chat-completion request transport.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Serialize;
use serde_json::Value;

use super::{BackendConfig, GatewayError};

/// Why a single request failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    /// Network, timeout, server or protocol error. Retried.
    Transport(String),
    /// HTTP 429 or an equivalent quota error. Retried.
    RateLimited(String),
    /// The provider refused the prompt on policy grounds. Not retried.
    ContentViolation(String),
}

/// Sends one prompt and returns the completion text.
pub trait Transport: Send + Sync {
    fn send(&self, prompt: &str) -> Result<String, TransportFailure>;
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

const CONTENT_FILTER_MARKERS: [&str; 4] = [
    "content_filter",
    "content_policy",
    "content policy",
    "responsibleaipolicyviolation",
];

fn mentions_content_filter(text: &str) -> bool {
    let lower = text.to_lowercase();
    CONTENT_FILTER_MARKERS.iter().any(|m| lower.contains(m))
}

fn truncate(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

/// Pull the completion text out of a chat-completion response body.
pub(crate) fn extract_completion(body: &Value) -> Result<String, TransportFailure> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| TransportFailure::Transport("response has no choices".into()))?;
    if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
        return Err(TransportFailure::ContentViolation(
            "completion stopped by content filter".into(),
        ));
    }
    match choice.get("message").and_then(|m| m.get("content")) {
        Some(Value::String(text)) => Ok(text.clone()),
        Some(Value::Null) | None => Ok(String::new()),
        Some(other) => Err(TransportFailure::Transport(format!(
            "unexpected message content {other}"
        ))),
    }
}

/// Classify a non-success HTTP response.
pub(crate) fn classify_error(status: StatusCode, body: &str) -> TransportFailure {
    let snippet = truncate(body, 200);
    if status == StatusCode::TOO_MANY_REQUESTS {
        TransportFailure::RateLimited(format!("{status}: {snippet}"))
    } else if status.is_client_error() && mentions_content_filter(body) {
        TransportFailure::ContentViolation(format!("{status}: {snippet}"))
    } else {
        TransportFailure::Transport(format!("{status}: {snippet}"))
    }
}

/// JSON chat-completion client: `POST {model, messages, temperature, max_tokens}`.
///
/// Sampling parameters other than temperature are left at server defaults.
#[derive(Debug)]
pub struct HttpTransport {
    client: Client,
    url: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    auth: Option<(String, String)>,
}

impl HttpTransport {
    /// Resolves credentials immediately so a missing key fails before any
    /// request is made.
    pub fn new(config: &BackendConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let auth = config.resolve_api_key()?.map(|key| {
            (
                config.auth_header.clone(),
                format!("{}{key}", config.auth_prefix),
            )
        });
        let client = Client::builder()
            .timeout(config.request_timeout.max(Duration::from_millis(1)))
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(Self {
            client,
            url: config.endpoint_url.clone(),
            model: config.model_id.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            auth,
        })
    }
}

impl Transport for HttpTransport {
    fn send(&self, prompt: &str) -> Result<String, TransportFailure> {
        let body = ChatRequest {
            model: &self.model,
            messages: [Message {
                role: "user",
                content: prompt,
            }],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        let mut request = self.client.post(&self.url).json(&body);
        if let Some((header, value)) = &self.auth {
            request = request.header(header.as_str(), value.as_str());
        }
        let response = request
            .send()
            .map_err(|e| TransportFailure::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| TransportFailure::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(classify_error(status, &text));
        }
        let json: Value = serde_json::from_str(&text)
            .map_err(|e| TransportFailure::Transport(format!("invalid JSON response: {e}")))?;
        extract_completion(&json)
    }
}
