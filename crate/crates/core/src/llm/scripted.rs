//! Deterministic canned-response backend for offline runs and tests.

use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, ChatRequest, Completion, LlmError, PromptId, Usage};

/// One canned reply, optionally guarded by a prompt id and a content substring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PromptId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    pub response: String,
}

impl ScriptEntry {
    pub fn reply(prompt: PromptId, response: impl Into<String>) -> Self {
        Self {
            prompt: Some(prompt),
            contains: None,
            response: response.into(),
        }
    }

    fn check(&self, req: &ChatRequest) -> Result<(), String> {
        if let Some(expected) = self.prompt {
            if req.prompt != Some(expected) {
                return Err(format!(
                    "expected prompt {expected}, got {}",
                    req.prompt.map_or("<none>".to_string(), |p| p.to_string())
                ));
            }
        }
        if let Some(needle) = &self.contains {
            if !req.content().contains(needle.as_str()) {
                return Err(format!("request does not contain `{needle}`"));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Entries(Vec<ScriptEntry>),
    Wrapped { entries: Vec<ScriptEntry> },
}

/// Replays entries strictly in order; running past the end is an error.
#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            cursor: Mutex::new(0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let file: ScriptFile =
            serde_json::from_str(text).map_err(|e| LlmError::InvalidScript(e.to_string()))?;
        let entries = match file {
            ScriptFile::Entries(e) | ScriptFile::Wrapped { entries: e } => e,
        };
        Ok(Self::new(entries))
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::InvalidScript(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Number of entries consumed so far.
    pub fn consumed(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.consumed()
    }
}

impl Backend for ScriptedBackend {
    fn send(&self, req: &ChatRequest) -> Result<Completion, LlmError> {
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let index = *cursor;
        let entry = self
            .entries
            .get(index)
            .ok_or(LlmError::BackendExhausted { calls: index + 1 })?;
        entry
            .check(req)
            .map_err(|reason| LlmError::ScriptMismatch { index, reason })?;
        *cursor += 1;
        let completion_tokens = entry.response.split_whitespace().count() as u64;
        let prompt_tokens = req.content().split_whitespace().count() as u64;
        Ok(Completion {
            text: entry.response.clone(),
            usage: Usage {
                prompt_tokens,
                completion_tokens,
                total_tokens: prompt_tokens + completion_tokens,
            },
        })
    }
}
