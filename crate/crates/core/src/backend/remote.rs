//! HTTP scoring client.
//!
//! Protocol v1: `POST {endpoint}/v1/score` with
//! `{"context", "continuation", "temperature"}`; the reply is
//! `{"tokens": [..], "token_logprobs": [..]}` or, on failure, an HTTP 4xx/5xx
//! status with `{"error": ".."}`.

use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, ModelBackend, ScoreRequest, ScoreResult};

pub const ENV_ENDPOINT: &str = "BAYESCOH_ENDPOINT";
pub const ENV_API_KEY: &str = "BAYESCOH_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): base · 2^retry, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

pub struct RemoteBackend {
    id: String,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    temperature_capable: bool,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Result<ScoreResult, BackendError>),
    Retry(String),
}

#[derive(Deserialize)]
struct ErrorBody {
    error: String,
}

impl RemoteBackend {
    pub fn new(endpoint: &str, backend_id: &str, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            id: backend_id.to_string(),
            url: format!("{}/v1/score", endpoint.trim_end_matches('/')),
            api_key,
            retry: RetryPolicy::default(),
            temperature_capable: false,
            agent,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Declare that the server renormalizes its token distributions at any
    /// requested temperature. Without this, only τ = 1 is accepted.
    pub fn with_temperature_support(mut self, capable: bool) -> Self {
        self.temperature_capable = capable;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, request: &ScoreRequest) -> Attempt {
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match call.send_json(request) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let body = match resp.body_mut().read_to_string() {
            Ok(b) => b,
            Err(e) => return Attempt::Retry(format!("reading body: {e}")),
        };
        let server_msg = || {
            serde_json::from_str::<ErrorBody>(&body)
                .map(|b| b.error)
                .unwrap_or_else(|_| body.chars().take(200).collect())
        };
        match status {
            200..=299 => Attempt::Done(ScoreResult::from_json(&body)),
            401 | 403 => Attempt::Done(Err(BackendError::Auth(format!(
                "HTTP {status}: {}",
                server_msg()
            )))),
            422 => Attempt::Done(Err(BackendError::Tokenization(server_msg()))),
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}: {}", server_msg())),
            _ => Attempt::Done(Err(BackendError::Protocol(format!(
                "HTTP {status}: {}",
                server_msg()
            )))),
        }
    }
}

impl ModelBackend for RemoteBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn supports_temperature(&self, temperature: f64) -> bool {
        self.temperature_capable || temperature == 1.0
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        let attempts = self.retry.attempts.max(1);
        let mut last = String::new();
        for i in 0..attempts {
            if i > 0 {
                std::thread::sleep(self.retry.delay(i - 1));
            }
            match self.attempt(request) {
                Attempt::Done(result) => return result,
                Attempt::Retry(msg) => {
                    log::debug!("{}: attempt {} failed: {msg}", self.url, i + 1);
                    last = msg;
                }
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last,
        })
    }
}
