//! Chat-completion client with retries, an on-disk response cache and
//! offline transports.
//!
//! [`LlmClient`] owns the policy (retry, cache, rate limit, in-flight bound)
//! and delegates the actual exchange to a [`Transport`]. The HTTP transport
//! talks to an OpenAI-compatible endpoint; the mock transports never touch
//! the network.

mod cache;
mod http;
mod mock;
mod retry;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, DiskCache};
pub use http::{HttpTransport, API_KEY_ENV, DEFAULT_ENDPOINT};
pub use mock::{
    mock_rewriter, split_sentences, FacetMockTransport, MockTransport, ScriptedTransport,
};
pub use retry::{RateLimiter, RetryPolicy};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("completion truncated at max_tokens on all {attempts} attempts")]
    Truncated { attempts: u32 },
    #[error("request rejected: {0}")]
    Fatal(String),
    #[error("cache error: {0}")]
    Cache(String),
}

/// Failure of a single exchange with the service.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    /// Timeouts, rate limiting, 5xx; worth retrying.
    #[error("transient: {0}")]
    Transient(String),
    #[error("auth: {0}")]
    Auth(String),
    /// The completion hit `max_tokens`. Retried like a transient fault.
    #[error("truncated completion")]
    Truncated { partial: String },
    #[error("fatal: {0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    pub fn new(
        model: impl Into<String>,
        prompt: impl Into<String>,
        temperature: f64,
        max_tokens: u32,
    ) -> Result<Self, LlmError> {
        let req = Self {
            model: model.into(),
            prompt: prompt.into(),
            temperature,
            max_tokens,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 over (model, prompt, temperature bits, max_tokens).
    pub fn cache_key(&self) -> String {
        let mut h = Sha256::new();
        for part in [self.model.as_bytes(), self.prompt.as_bytes()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        h.update(self.temperature.to_bits().to_le_bytes());
        h.update(self.max_tokens.to_le_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub text: String,
    pub cached: bool,
    pub attempt_count: u32,
    /// RFC 3339 time at which the completion was first produced.
    pub created_at: String,
}

/// Anything that can answer a completion request.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;

    /// Upper bound on concurrent `complete` calls worth issuing.
    fn max_in_flight(&self) -> usize {
        1
    }
}

/// One request/response exchange with a completion service.
pub trait Transport: Send + Sync {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError> {
        (**self).send(request)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError> {
        (**self).send(request)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientStats {
    /// Exchanges attempted against the transport, retries included.
    pub transport_calls: usize,
    pub cache_hits: usize,
    pub completions: usize,
}

struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().unwrap();
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.active.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Retrying, caching client over a [`Transport`].
pub struct LlmClient<T> {
    transport: T,
    retry: RetryPolicy,
    cache: Option<DiskCache>,
    limiter: Option<RateLimiter>,
    in_flight: InFlight,
    sleep: fn(Duration),
    transport_calls: AtomicUsize,
    cache_hits: AtomicUsize,
    completions: AtomicUsize,
}

impl<T: Transport> LlmClient<T> {
    pub fn new(transport: T) -> Self {
        Self {
            transport,
            retry: RetryPolicy::default(),
            cache: None,
            limiter: None,
            in_flight: InFlight {
                limit: DEFAULT_MAX_IN_FLIGHT,
                active: Mutex::new(0),
                freed: Condvar::new(),
            },
            sleep: std::thread::sleep,
            transport_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
            completions: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_rate_limit(mut self, limiter: RateLimiter) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.in_flight.limit = limit.max(1);
        self
    }

    /// Replaces the backoff sleep, e.g. with a no-op in tests.
    pub fn with_sleep(mut self, sleep: fn(Duration)) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn stats(&self) -> ClientStats {
        ClientStats {
            transport_calls: self.transport_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
            completions: self.completions.load(Ordering::SeqCst),
        }
    }

    fn send_with_retries(&self, request: &LlmRequest) -> Result<(String, u32), LlmError> {
        let cap = self.retry.max_attempts.max(1);
        let mut last = String::new();
        let mut truncated = false;
        for attempt in 1..=cap {
            if attempt > 1 {
                (self.sleep)(self.retry.delay_before(attempt));
            }
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            self.transport_calls.fetch_add(1, Ordering::SeqCst);
            match self.transport.send(request) {
                Ok(text) => return Ok((text, attempt)),
                Err(TransportError::Auth(msg)) => return Err(LlmError::Auth(msg)),
                Err(TransportError::Fatal(msg)) => return Err(LlmError::Fatal(msg)),
                Err(TransportError::Transient(msg)) => {
                    log::warn!("attempt {attempt}/{cap} failed: {msg}");
                    truncated = false;
                    last = msg;
                }
                Err(TransportError::Truncated { .. }) => {
                    log::warn!("attempt {attempt}/{cap} truncated at max_tokens");
                    truncated = true;
                    last = "truncated completion".into();
                }
            }
        }
        if truncated {
            Err(LlmError::Truncated { attempts: cap })
        } else {
            Err(LlmError::Exhausted {
                attempts: cap,
                last,
            })
        }
    }
}

impl<T: Transport> CompletionClient for LlmClient<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.validate()?;
        let key = request.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache
                .get(&key)
                .map_err(|e| LlmError::Cache(e.to_string()))?
            {
                self.cache_hits.fetch_add(1, Ordering::SeqCst);
                self.completions.fetch_add(1, Ordering::SeqCst);
                return Ok(LlmResponse {
                    text: entry.text,
                    cached: true,
                    attempt_count: 1,
                    created_at: entry.created_at,
                });
            }
        }
        let (text, attempt_count) = {
            let _slot = self.in_flight.acquire();
            self.send_with_retries(request)?
        };
        let created_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        if let Some(cache) = &self.cache {
            let entry = CacheEntry {
                request: request.clone(),
                text: text.clone(),
                created_at: created_at.clone(),
            };
            cache
                .put(&key, &entry)
                .map_err(|e| LlmError::Cache(e.to_string()))?;
        }
        self.completions.fetch_add(1, Ordering::SeqCst);
        Ok(LlmResponse {
            text,
            cached: false,
            attempt_count,
            created_at,
        })
    }

    fn max_in_flight(&self) -> usize {
        self.in_flight.limit
    }
}

/// SHA-256 of a prompt, hex encoded.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}
