//! Chat-completion access: transport, retry with exponential backoff, the
//! include-on-failure policy and a record/replay response cache.

mod cache;
mod clock;
mod rate_limit;
mod retry;
mod transport;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{replay_complete, CacheEntry, CacheKey, CacheMode, ResponseCache};
pub use clock::{Clock, MockClock, SystemClock};
pub use rate_limit::TokenBucket;
pub use retry::{apply_include_fallback, complete_with_retry};
pub use transport::{HttpTransport, Transport, TransportFailure};

use crate::protocol::Dialect;

pub(crate) mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// Exponential backoff settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    #[serde(with = "secs", rename = "base_delay_secs")]
    pub base_delay: Duration,
    pub multiplier: f64,
    #[serde(with = "secs", rename = "max_delay_secs")]
    pub max_delay: Duration,
    /// Each delay is scaled by a uniform factor in `[1 - j, 1 + j]`.
    pub jitter_fraction: f64,
    /// How many extra queries an uninterpretable answer earns before the
    /// include-on-failure policy takes over. Counted within `max_attempts`.
    pub invalid_output_retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            multiplier: 2.0,
            max_delay: Duration::from_secs(60),
            jitter_fraction: 0.1,
            invalid_output_retries: 1,
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_attempts < 1 {
            return Err(GatewayError::Config(
                "max_attempts must be at least 1".into(),
            ));
        }
        if !(self.multiplier >= 1.0 && self.multiplier.is_finite()) {
            return Err(GatewayError::Config("multiplier must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.jitter_fraction) {
            return Err(GatewayError::Config(
                "jitter_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Un-jittered delay before the `retry`-th retry (`retry >= 1`), i.e.
    /// before attempt `retry + 1`: `min(max_delay, base_delay * multiplier^(retry-1))`.
    pub fn nominal_delay(&self, retry: u32) -> Duration {
        let exponent = retry.saturating_sub(1).min(i32::MAX as u32) as i32;
        let secs = self.base_delay.as_secs_f64() * self.multiplier.powi(exponent);
        let capped = secs.min(self.max_delay.as_secs_f64());
        Duration::try_from_secs_f64(capped).unwrap_or(self.max_delay)
    }

    /// Delay with jitter applied; `unit` is a draw from `[-1, 1]`.
    pub fn jittered_delay(&self, retry: u32, unit: f64) -> Duration {
        let factor = 1.0 + self.jitter_fraction * unit.clamp(-1.0, 1.0);
        self.nominal_delay(retry).mul_f64(factor.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWrap {
    pub begin: String,
    pub end: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLimitConfig {
    pub capacity: u32,
    pub refill_per_second: f64,
}

fn default_temperature() -> f64 {
    0.2
}
fn default_max_tokens() -> u32 {
    5
}
fn default_timeout() -> Duration {
    Duration::from_secs(60)
}
fn default_concurrency() -> usize {
    4
}
fn default_auth_header() -> String {
    "authorization".into()
}
fn default_auth_prefix() -> String {
    "Bearer ".into()
}

/// One chat-completion backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// Name used to select this backend from a config file.
    pub name: String,
    pub endpoint_url: String,
    pub model_id: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(
        default = "default_timeout",
        with = "secs",
        rename = "request_timeout_secs"
    )]
    pub request_timeout: Duration,
    #[serde(default)]
    pub special_token_wrap: Option<TokenWrap>,
    /// Environment variable holding the API key. Keys are never read from
    /// files.
    #[serde(default)]
    pub credentials_env_var: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub rate_limit: Option<RateLimitConfig>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl BackendConfig {
    pub fn new(name: &str, endpoint_url: &str, model_id: &str) -> Self {
        Self {
            name: name.into(),
            endpoint_url: endpoint_url.into(),
            model_id: model_id.into(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            request_timeout: default_timeout(),
            special_token_wrap: None,
            credentials_env_var: None,
            auth_header: default_auth_header(),
            auth_prefix: default_auth_prefix(),
            concurrency: default_concurrency(),
            rate_limit: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::Config(format!(
                "{}: temperature must be non-negative",
                self.name
            )));
        }
        if self.max_tokens < 1 {
            return Err(GatewayError::Config(format!(
                "{}: max_tokens must be at least 1",
                self.name
            )));
        }
        if self.concurrency < 1 {
            return Err(GatewayError::Config(format!(
                "{}: concurrency must be at least 1",
                self.name
            )));
        }
        if let Some(limit) = &self.rate_limit {
            if limit.capacity < 1
                || limit.refill_per_second.is_nan()
                || limit.refill_per_second <= 0.0
            {
                return Err(GatewayError::Config(format!(
                    "{}: rate limit needs capacity >= 1 and a positive refill rate",
                    self.name
                )));
            }
        }
        reqwest::Url::parse(&self.endpoint_url).map_err(|e| {
            GatewayError::Config(format!(
                "{}: endpoint_url {:?}: {e}",
                self.name, self.endpoint_url
            ))
        })?;
        self.retry.validate()
    }

    /// The API key from the configured environment variable. `Ok(None)` when
    /// the backend needs no credentials.
    pub fn resolve_api_key(&self) -> Result<Option<String>, GatewayError> {
        match &self.credentials_env_var {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(value) if !value.trim().is_empty() => Ok(Some(value)),
                _ => Err(GatewayError::Config(format!(
                    "{}: environment variable {var} is not set",
                    self.name
                ))),
            },
        }
    }

    pub fn dialect(&self) -> Dialect {
        match &self.special_token_wrap {
            None => Dialect::Plain,
            Some(wrap) => Dialect::SpecialTokenWrapped {
                begin: wrap.begin.clone(),
                end: wrap.end.clone(),
            },
        }
    }

    pub fn cache_key(&self, prompt: &str) -> CacheKey {
        CacheKey::new(&self.model_id, prompt, self.temperature, self.max_tokens)
    }
}

/// Backends file: `{"backends": [ ... ]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendFile {
    pub backends: Vec<BackendConfig>,
}

impl BackendFile {
    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        serde_json::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))
    }

    pub fn find(&self, name: &str) -> Result<&BackendConfig, GatewayError> {
        self.backends
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| GatewayError::Config(format!("no backend named {name:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionStatus {
    Ok,
    TransportError,
    RateLimited,
    ContentViolation,
    InvalidOutput,
}

/// Final result of querying a model for one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionOutcome {
    pub status: CompletionStatus,
    pub raw_text: Option<String>,
    pub attempts: u32,
    pub latency: Duration,
    /// When the completion was obtained (for replayed outcomes, when it was
    /// recorded).
    pub completed_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no cached completion for key {0}")]
    CacheMiss(String),
    #[error("corrupt cache at line {line}: {message}")]
    CorruptCache { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A backend plus its retry policy, optional cache and rate limiter.
pub struct Gateway {
    config: BackendConfig,
    transport: Option<Arc<dyn Transport>>,
    cache: Option<Arc<ResponseCache>>,
    mode: CacheMode,
    clock: Arc<dyn Clock>,
    limiter: Option<TokenBucket>,
    transport_calls: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.config.name)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Build a gateway. `transport` may be `None` only in replay mode;
    /// `cache` is required in both cache modes.
    pub fn new(
        config: BackendConfig,
        mode: CacheMode,
        transport: Option<Arc<dyn Transport>>,
        cache: Option<Arc<ResponseCache>>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        if mode != CacheMode::Live && cache.is_none() {
            return Err(GatewayError::Config(format!(
                "cache mode {mode} needs a cache file"
            )));
        }
        if mode != CacheMode::Replay && transport.is_none() {
            return Err(GatewayError::Config(format!(
                "cache mode {mode} needs a live transport"
            )));
        }
        let limiter = config
            .rate_limit
            .as_ref()
            .map(|l| TokenBucket::new(l.capacity, l.refill_per_second, clock.clone()));
        Ok(Self {
            config,
            transport,
            cache,
            mode,
            clock,
            limiter,
            transport_calls: AtomicU64::new(0),
        })
    }

    /// Gateway talking to the configured HTTP endpoint. Credentials are
    /// resolved here, before any request, unless the mode is pure replay.
    pub fn http(
        config: BackendConfig,
        mode: CacheMode,
        cache: Option<Arc<ResponseCache>>,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        let transport: Option<Arc<dyn Transport>> = match mode {
            CacheMode::Replay => None,
            _ => Some(Arc::new(HttpTransport::new(&config)?)),
        };
        Self::new(config, mode, transport, cache, Arc::new(SystemClock::new()))
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Number of requests sent to the transport so far.
    pub fn transport_calls(&self) -> u64 {
        self.transport_calls.load(Ordering::SeqCst)
    }

    fn live(&self, prompt: &str) -> Result<CompletionOutcome, GatewayError> {
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| GatewayError::Config("no live transport in replay mode".into()))?;
        let counted = CountingTransport {
            inner: transport.as_ref(),
            calls: &self.transport_calls,
            limiter: self.limiter.as_ref(),
        };
        Ok(complete_with_retry(
            &counted,
            &self.config.retry,
            self.clock.as_ref(),
            prompt,
        ))
    }

    /// Complete `prompt` according to the cache mode.
    pub fn complete(&self, prompt: &str) -> Result<CompletionOutcome, GatewayError> {
        match (&self.cache, self.mode) {
            (_, CacheMode::Live) | (None, _) => self.live(prompt),
            (Some(cache), mode) => {
                let key = self.config.cache_key(prompt);
                replay_complete(cache, mode, &key, || self.live(prompt))
            }
        }
    }
}

struct CountingTransport<'a> {
    inner: &'a dyn Transport,
    calls: &'a AtomicU64,
    limiter: Option<&'a TokenBucket>,
}

impl Transport for CountingTransport<'_> {
    fn send(&self, prompt: &str) -> Result<String, TransportFailure> {
        if let Some(limiter) = self.limiter {
            limiter.acquire();
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.send(prompt)
    }
}
