//! The scoring contract: given a context, a continuation, and a temperature,
//! return the log-probability of each continuation token.
//!
//! Implementations:
//! - [`UniformModel`]: every token scores −ln|V|
//! - [`TabularModel`]: an explicit categorical world; the oracle realizes its
//!   exact Bayes posterior, the under-updater a damped and noisy one
//! - [`RemoteBackend`]: JSON over HTTP (`POST /v1/score`)
//! - [`Cached`]: persistent exact-match cache around any backend

mod cache;
mod remote;
mod tabular;
mod uniform;
mod world;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheKey, CacheStats, CacheStore, Cached};
pub use remote::{RemoteBackend, RetryPolicy, ENV_API_KEY, ENV_ENDPOINT};
pub use tabular::{noisy_underupdater, tabular_oracle, TabularModel};
pub use uniform::{uniform_model, UniformModel};
pub use world::{Binding, Symbol, TabularWorld, WorldFile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend `{backend}` cannot renormalize at temperature {temperature}")]
    UnsupportedTemperature { backend: String, temperature: f64 },
    #[error("tokenization error: {0}")]
    Tokenization(String),
    #[error("binding error: {0}")]
    Binding(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("cache store error: {0}")]
    Store(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub context: String,
    pub continuation: String,
    pub temperature: f64,
}

impl ScoreRequest {
    pub fn new(
        context: impl Into<String>,
        continuation: impl Into<String>,
        temperature: f64,
    ) -> Self {
        Self {
            context: context.into(),
            continuation: continuation.into(),
            temperature,
        }
    }

    pub fn check(&self) -> Result<(), BackendError> {
        if self.continuation.is_empty() {
            return Err(BackendError::InvalidRequest("continuation is empty".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Per-token natural-log probabilities of a continuation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreResult {
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<f64>,
    #[serde(skip)]
    pub cumulative: f64,
}

impl ScoreResult {
    /// Validates that every log-prob is ≤ 0 and not NaN, and that token and
    /// log-prob lists line up.
    pub fn new(tokens: Vec<String>, token_logprobs: Vec<f64>) -> Result<Self, BackendError> {
        if tokens.len() != token_logprobs.len() {
            return Err(BackendError::Protocol(format!(
                "{} tokens but {} log-probabilities",
                tokens.len(),
                token_logprobs.len()
            )));
        }
        if token_logprobs.is_empty() {
            return Err(BackendError::Protocol("empty token list".into()));
        }
        if let Some(bad) = token_logprobs.iter().find(|lp| lp.is_nan() || **lp > 0.0) {
            return Err(BackendError::Protocol(format!(
                "invalid token log-probability {bad}"
            )));
        }
        let cumulative = token_logprobs.iter().sum();
        Ok(Self {
            tokens,
            token_logprobs,
            cumulative,
        })
    }

    pub fn single(token: impl Into<String>, logprob: f64) -> Result<Self, BackendError> {
        Self::new(vec![token.into()], vec![logprob])
    }

    /// Wire / cache form: `{"tokens": [...], "token_logprobs": [...]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("score result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        #[derive(Deserialize)]
        struct Wire {
            tokens: Vec<String>,
            token_logprobs: Vec<f64>,
        }
        let w: Wire = serde_json::from_str(text)
            .map_err(|e| BackendError::Protocol(format!("malformed reply: {e}")))?;
        Self::new(w.tokens, w.token_logprobs)
    }
}

/// A language model as seen by the pipeline.
///
/// Implementations must be safe to call concurrently.
pub trait ModelBackend: Send + Sync {
    /// Stable identifier; part of every cache key.
    fn id(&self) -> &str;

    /// Whether the backend can renormalize its token distributions at `temperature`.
    fn supports_temperature(&self, temperature: f64) -> bool {
        let _ = temperature;
        true
    }

    /// Raw scoring. Callers should go through [`score`], which checks the
    /// request and result invariants.
    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError>;
}

impl<T: ModelBackend + ?Sized> ModelBackend for Arc<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn supports_temperature(&self, temperature: f64) -> bool {
        (**self).supports_temperature(temperature)
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        (**self).score(request)
    }
}

impl<T: ModelBackend + ?Sized> ModelBackend for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn supports_temperature(&self, temperature: f64) -> bool {
        (**self).supports_temperature(temperature)
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        (**self).score(request)
    }
}

/// Score `request` on `backend`, enforcing request and result invariants.
pub fn score<B: ModelBackend + ?Sized>(
    backend: &B,
    request: &ScoreRequest,
) -> Result<ScoreResult, BackendError> {
    request.check()?;
    if !backend.supports_temperature(request.temperature) {
        return Err(BackendError::UnsupportedTemperature {
            backend: backend.id().to_string(),
            temperature: request.temperature,
        });
    }
    let result = backend.score(request)?;
    // re-validate; implementations may build ScoreResult by hand
    ScoreResult::new(result.tokens, result.token_logprobs)
}

/// Wrapper that counts calls reaching the inner backend.
pub struct Counting<B> {
    inner: B,
    calls: AtomicU64,
}

impl<B: ModelBackend> Counting<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: ModelBackend> ModelBackend for Counting<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn supports_temperature(&self, temperature: f64) -> bool {
        self.inner.supports_temperature(temperature)
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.score(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn result_sums_logprobs() {
        let r = ScoreResult::new(vec!["a".into(), "b".into()], vec![-1.2, -0.3]).unwrap();
        assert!((r.cumulative - -1.5).abs() < 1e-12);
    }

    #[test]
    fn positive_logprob_is_protocol_error() {
        assert!(matches!(
            ScoreResult::single("a", 0.1),
            Err(BackendError::Protocol(_))
        ));
        assert!(matches!(
            ScoreResult::single("a", f64::NAN),
            Err(BackendError::Protocol(_))
        ));
    }

    #[test]
    fn wire_round_trip_is_exact() {
        let r = ScoreResult::new(vec![" x".into(), ".".into()], vec![-0.1 - 0.2, -1e-300]).unwrap();
        let back = ScoreResult::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(
            r.to_json(),
            r#"{"tokens":[" x","."],"token_logprobs":[-0.30000000000000004,-1e-300]}"#
        );
    }

    #[test]
    fn request_checks() {
        assert!(ScoreRequest::new("c", "", 1.0).check().is_err());
        assert!(ScoreRequest::new("c", "x", 0.0).check().is_err());
        assert!(ScoreRequest::new("c", "x", f64::INFINITY).check().is_err());
        assert!(ScoreRequest::new("", "x", 0.5).check().is_ok());
    }
}
