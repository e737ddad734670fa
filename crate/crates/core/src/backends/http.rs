use std::time::Duration;

use serde_json::Value;
use ureq::Agent;

use super::wire::Endpoint;
use super::{Backend, BackendError};

/// Environment variable holding the bearer token for real backends.
pub const TOKEN_ENV: &str = "CONCAP_BACKEND_TOKEN";

/// Retries cover transport failures only; an HTTP error status is final.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based): 250 ms, 500 ms, ...
    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

/// JSON-over-HTTP client for a server implementing the `/v1/` endpoints.
pub struct HttpBackend {
    base_url: String,
    agent: Agent,
    token: Option<String>,
    retry: RetryPolicy,
}

impl HttpBackend {
    /// Reads the bearer token from [`TOKEN_ENV`] when set.
    pub fn new(base_url: impl Into<String>) -> Self {
        let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        Self::with_token(base_url, token)
    }

    pub fn with_token(base_url: impl Into<String>, token: Option<String>) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            token,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn send_once(&self, url: &str, request: &Value) -> Result<(u16, String), ureq::Error> {
        let mut builder = self.agent.post(url);
        if let Some(token) = &self.token {
            builder = builder.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = builder.send_json(request)?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string()?;
        Ok((status, body))
    }
}

impl Backend for HttpBackend {
    fn identity(&self) -> String {
        format!("http({})", self.base_url)
    }

    fn call(&self, endpoint: Endpoint, request: &Value) -> Result<Value, BackendError> {
        let url = format!("{}{}", self.base_url, endpoint.path());
        let attempts = self.retry.attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(self.retry.backoff(attempt - 1));
            }
            match self.send_once(&url, request) {
                Ok((status, body)) if (200..300).contains(&status) => {
                    return serde_json::from_str(&body).map_err(|e| BackendError::Protocol {
                        endpoint,
                        reason: format!("invalid JSON body: {e}"),
                    });
                }
                Ok((status, body)) => {
                    return Err(BackendError::Application {
                        endpoint,
                        status,
                        body,
                    })
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(BackendError::Unreachable {
            attempts,
            reason: last_error,
        })
    }
}
