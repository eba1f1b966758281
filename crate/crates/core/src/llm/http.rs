//! OpenAI-compatible chat-completions transport with retry.

use std::thread;
use std::time::Duration;

use serde::Deserialize;

use super::{Backend, ChatRequest, Completion, LlmError, Usage};

/// Transient failures are retried `retries` times, waiting `base_delay`,
/// then twice that, and so on.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL (e.g. `http://localhost:8000/v1`) or a full `/chat/completions` URL.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            timeout: Duration::from_secs(300),
            retry: RetryPolicy::default(),
        }
    }

    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ApiResponse {
    choices: Vec<ApiChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct ApiChoice {
    message: ApiMessage,
}

#[derive(Deserialize)]
struct ApiMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Attempt {
    Done(Completion),
    Transient { error: LlmError, rate_limited: bool },
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::TransportError(format!("failed to build HTTP client: {e}")))?;
        Ok(Self { config, client })
    }

    fn attempt(&self, req: &ChatRequest) -> Attempt {
        let mut builder = self.client.post(self.config.url()).json(req);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = match builder.send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Transient {
                    error: LlmError::TransportError(e.to_string()),
                    rate_limited: false,
                }
            }
        };
        let status = response.status();
        let body = match response.text() {
            Ok(b) => b,
            Err(e) => {
                return Attempt::Transient {
                    error: LlmError::TransportError(e.to_string()),
                    rate_limited: false,
                }
            }
        };
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Transient {
                error: LlmError::TransportError(format!("status {status}: {body}")),
                rate_limited: status.as_u16() == 429,
            };
        }
        if !status.is_success() {
            return Attempt::Fatal(LlmError::MalformedRequest {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: ApiResponse = match serde_json::from_str(&body) {
            Ok(p) => p,
            Err(e) => return Attempt::Fatal(LlmError::InvalidResponse(e.to_string())),
        };
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Attempt::Fatal(LlmError::InvalidResponse("no choices in response".into()));
        };
        Attempt::Done(Completion {
            text: choice.message.content.unwrap_or_default(),
            usage: parsed.usage.unwrap_or_default(),
        })
    }
}

impl Backend for HttpBackend {
    fn send(&self, req: &ChatRequest) -> Result<Completion, LlmError> {
        let policy = self.config.retry;
        let mut retry = 0;
        loop {
            match self.attempt(req) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient { error, rate_limited } => {
                    if retry >= policy.retries {
                        return Err(if rate_limited {
                            LlmError::RateLimited {
                                attempts: retry + 1,
                            }
                        } else {
                            error
                        });
                    }
                    log::warn!("transient LLM failure ({error}); retrying");
                    thread::sleep(policy.delay(retry));
                    retry += 1;
                }
            }
        }
    }
}
