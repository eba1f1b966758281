//! Provider-agnostic chat-completion access.
//!
//! A [`Gateway`] renders prompt templates loaded from disk, sends them through
//! a [`Backend`] (OpenAI-compatible HTTP or a scripted replay) and records
//! every request/response pair in the run transcript.

mod extract;
mod http;
mod prompt;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{Event, Transcript};

pub use extract::{
    extract_code, extract_fenced, extract_json, extract_tagged, fences, parse_task_type,
    ExtractError, Fence, FenceKind, Payload,
};
pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub use prompt::{render_prompt, PromptId, PromptLibrary, PromptTemplate, Slots};
pub use scripted::{ScriptEntry, ScriptedBackend};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request rejected with status {status}: {body}")]
    MalformedRequest { status: u16, body: String },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("scripted backend exhausted after {calls} calls")]
    BackendExhausted { calls: usize },
    #[error("scripted entry {index} does not match request: {reason}")]
    ScriptMismatch { index: usize, reason: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("missing prompt slot `{0}`")]
    MissingSlot(String),
    #[error("prompt `{id}` could not be loaded: {reason}")]
    PromptLoad { id: String, reason: String },
    #[error("invalid script: {0}")]
    InvalidScript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// One chat-completion request. Serializes to the OpenAI wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Template the request was rendered from; never sent over the wire.
    #[serde(skip)]
    pub prompt: Option<PromptId>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        let first_turn = self.messages.iter().find(|m| m.role != Role::System);
        match first_turn {
            None => return Err(LlmError::InvalidRequest("no user turn".into())),
            Some(m) if m.role != Role::User => {
                return Err(LlmError::InvalidRequest(
                    "first non-system turn must be from the user".into(),
                ))
            }
            _ => {}
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// All message contents joined, used for scripted matching.
    pub fn content(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

pub trait Backend: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<Completion, LlmError>;
}

/// Sends `req` through `backend` after validating it.
pub fn complete(req: &ChatRequest, backend: &dyn Backend) -> Result<Completion, LlmError> {
    req.validate()?;
    backend.send(req)
}

#[derive(Debug, Clone)]
pub struct GatewaySettings {
    pub model: String,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    /// Temperature for classification and parsing prompts.
    pub parse_temperature: f64,
    /// Temperature for generation and variation prompts.
    pub generate_temperature: f64,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            model: "default".into(),
            max_tokens: 4096,
            seed: None,
            parse_temperature: 0.0,
            generate_temperature: 0.7,
        }
    }
}

/// Prompt rendering plus transport, shared by every agent.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn Backend>,
    prompts: Arc<PromptLibrary>,
    settings: GatewaySettings,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>, prompts: PromptLibrary, settings: GatewaySettings) -> Self {
        Self {
            backend,
            prompts: Arc::new(prompts),
            settings,
        }
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    pub fn settings(&self) -> &GatewaySettings {
        &self.settings
    }

    pub fn build_request(&self, id: PromptId, slots: &Slots) -> Result<ChatRequest, LlmError> {
        let body = render_prompt(self.prompts.template(id), slots)?;
        let mut messages = Vec::new();
        if let Some(system) = self.prompts.system() {
            messages.push(Message::system(system));
        }
        messages.push(Message::user(body));
        let temperature = if id.is_parsing() {
            self.settings.parse_temperature
        } else {
            self.settings.generate_temperature
        };
        Ok(ChatRequest {
            model: self.settings.model.clone(),
            messages,
            temperature,
            max_tokens: self.settings.max_tokens,
            seed: self.settings.seed,
            prompt: Some(id),
        })
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<Completion, LlmError> {
        complete(req, self.backend.as_ref())
    }

    /// Renders `id`, sends it and logs both sides to `transcript`.
    pub fn ask(
        &self,
        id: PromptId,
        slots: &Slots,
        transcript: &mut Transcript,
    ) -> Result<String, LlmError> {
        let req = self.build_request(id, slots)?;
        transcript.push(Event::Prompt {
            prompt: id,
            messages: req.messages.clone(),
        });
        match self.complete(&req) {
            Ok(completion) => {
                transcript.push(Event::Response {
                    prompt: id,
                    text: completion.text.clone(),
                });
                Ok(completion.text)
            }
            Err(e) => {
                transcript.diagnostic("llm", e.to_string());
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(messages: Vec<Message>) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages,
            temperature: 0.0,
            max_tokens: 16,
            seed: None,
            prompt: None,
        }
    }

    #[test]
    fn request_validation() {
        assert!(req(vec![]).validate().is_err());
        assert!(req(vec![Message::system("s")]).validate().is_err());
        let assistant_first = Message {
            role: Role::Assistant,
            content: "a".into(),
        };
        assert!(req(vec![Message::system("s"), assistant_first]).validate().is_err());
        assert!(req(vec![Message::system("s"), Message::user("u")]).validate().is_ok());
        let mut bad = req(vec![Message::user("u")]);
        bad.temperature = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn wire_format_omits_prompt_tag() {
        let mut r = req(vec![Message::user("hi")]);
        r.prompt = Some(PromptId::Cls);
        let v = serde_json::to_value(&r).unwrap();
        assert!(v.get("prompt").is_none());
        assert_eq!(v["messages"][0]["role"], "user");
    }
}
