//! Append-only run transcripts written as JSON lines.
//!
//! Absolute run-directory prefixes are rewritten at serialization time so two
//! runs of the same scripted session produce byte-identical logs.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::executor::{ExecutionResult, ExecutionStatus};
use crate::llm::{Message, PromptId};

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Stage {
        name: String,
        #[serde(skip_serializing_if = "Value::is_null")]
        detail: Value,
    },
    Prompt {
        prompt: PromptId,
        messages: Vec<Message>,
    },
    Response {
        prompt: PromptId,
        text: String,
    },
    Execution {
        label: String,
        status: ExecutionStatus,
        #[serde(skip_serializing_if = "Option::is_none")]
        payload: Option<Value>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
        stdout_tail: String,
        stderr_tail: String,
    },
    Evaluation {
        label: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        score: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Diagnostic {
        stage: String,
        message: String,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Transcript {
    events: Vec<Event>,
    scrub: Vec<(String, String)>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces `prefix` with `placeholder` in every serialized line.
    pub fn scrub_prefix(&mut self, prefix: impl Into<String>, placeholder: impl Into<String>) {
        let prefix = prefix.into();
        if !prefix.is_empty() {
            self.scrub.push((prefix, placeholder.into()));
            // longest prefix first so nested paths are rewritten whole
            self.scrub.sort_by_key(|(p, _)| std::cmp::Reverse(p.len()));
        }
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn stage(&mut self, name: &str, detail: Value) {
        self.push(Event::Stage {
            name: name.to_string(),
            detail,
        });
    }

    pub fn diagnostic(&mut self, stage: &str, message: impl Into<String>) {
        let message = message.into();
        log::debug!("[{stage}] {message}");
        self.push(Event::Diagnostic {
            stage: stage.to_string(),
            message,
        });
    }

    pub fn execution(&mut self, label: &str, result: &ExecutionResult) {
        self.push(Event::Execution {
            label: label.to_string(),
            status: result.status,
            payload: result.result_payload.clone(),
            error: result.error_text.clone(),
            stdout_tail: result.stdout_tail.clone(),
            stderr_tail: result.stderr_tail.clone(),
        });
    }

    pub fn evaluation(&mut self, label: &str, score: Option<f64>, error: Option<String>) {
        self.push(Event::Evaluation {
            label: label.to_string(),
            score,
            error,
        });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Moves every event of `other` to the end of this transcript.
    pub fn append(&mut self, other: Transcript) {
        self.events.extend(other.events);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            let mut line = serde_json::to_string(event).expect("event serializes");
            for (prefix, placeholder) in &self.scrub {
                line = line.replace(prefix.as_str(), placeholder);
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())?;
        file.flush()
    }
}

/// Writes `records` as one JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).map_err(std::io::Error::other)?);
        out.push('\n');
    }
    fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scrub_rewrites_prefixes() {
        let mut t = Transcript::new();
        t.scrub_prefix("/tmp/run-1", "<run>");
        t.scrub_prefix("/tmp/run-1/work/a", "<workdir>");
        t.diagnostic("x", "failed at /tmp/run-1/work/a/solver.py and /tmp/run-1/private");
        let line = t.to_jsonl();
        assert!(line.contains("<workdir>/solver.py"));
        assert!(line.contains("<run>/private"));
        assert!(!line.contains("/tmp/run-1"));
    }
}
