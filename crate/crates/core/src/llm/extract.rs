//! Extraction of fenced payloads from model output.

use regex::Regex;
use serde_json::Value;
use std::sync::LazyLock;
use thiserror::Error;

use crate::analyzer::TaskType;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no matching fenced block in model output")]
    NoFence,
    #[error("fenced JSON does not parse at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("could not determine task type from `{0}`")]
    Unparsable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FenceKind {
    Code,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Code(String),
    Json(Value),
}

/// One ```tag ... ``` block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fence<'a> {
    pub tag: &'a str,
    pub body: String,
}

const CODE_TAGS: [&str; 4] = ["", "python", "py", "python3"];

/// All fenced blocks in order of appearance. An unterminated final fence runs
/// to the end of the text.
pub fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let trimmed = line.trim_start();
        let Some(tag) = trimmed.strip_prefix("```") else {
            continue;
        };
        let tag = tag.trim();
        let mut body = Vec::new();
        for inner in lines.by_ref() {
            if inner.trim() == "```" {
                break;
            }
            body.push(inner);
        }
        out.push(Fence {
            tag,
            body: body.join("\n"),
        });
    }
    out
}

/// Body of the first fence whose tag equals `tag` (case-insensitive).
pub fn extract_tagged(text: &str, tag: &str) -> Option<String> {
    fences(text)
        .into_iter()
        .find(|f| f.tag.eq_ignore_ascii_case(tag))
        .map(|f| f.body)
}

pub fn extract_code(text: &str) -> Result<String, ExtractError> {
    fences(text)
        .into_iter()
        .find(|f| CODE_TAGS.iter().any(|t| f.tag.eq_ignore_ascii_case(t)))
        .map(|f| f.body)
        .ok_or(ExtractError::NoFence)
}

pub fn parse_json_text(body: &str) -> Result<Value, ExtractError> {
    serde_json::from_str(body).map_err(|e| ExtractError::ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// First ```json fence, falling back to the first untagged fence.
pub fn extract_json(text: &str) -> Result<Value, ExtractError> {
    let all = fences(text);
    let fence = all
        .iter()
        .find(|f| f.tag.eq_ignore_ascii_case("json"))
        .or_else(|| all.iter().find(|f| f.tag.is_empty()))
        .ok_or(ExtractError::NoFence)?;
    parse_json_text(&fence.body)
}

pub fn extract_fenced(text: &str, kind: FenceKind) -> Result<Payload, ExtractError> {
    match kind {
        FenceKind::Code => extract_code(text).map(Payload::Code),
        FenceKind::Json => extract_json(text).map(Payload::Json),
    }
}

static ASSIST_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(assist|assistant|assistant-type)\b").unwrap());
static OPT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(opt|optimization|optimisation|optimization-type|optimize)\b").unwrap()
});

fn task_type_word(word: &str) -> Option<TaskType> {
    let assist = ASSIST_RE.is_match(word);
    let opt = OPT_RE.is_match(word);
    match (assist, opt) {
        (true, false) => Some(TaskType::Assist),
        (false, true) => Some(TaskType::Opt),
        _ => None,
    }
}

/// Tolerant classifier reply parsing: a fenced JSON `task_type` field wins,
/// otherwise exactly one of the two keyword families must occur.
pub fn parse_task_type(text: &str) -> Result<TaskType, ExtractError> {
    if let Ok(value) = extract_json(text) {
        let field = ["task_type", "type", "tau"]
            .iter()
            .find_map(|k| value.get(*k).and_then(Value::as_str));
        if let Some(t) = field.and_then(task_type_word) {
            return Ok(t);
        }
    }
    task_type_word(text).ok_or_else(|| ExtractError::Unparsable(text.chars().take(200).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_fence_parses() {
        let v = extract_json("```json\n{\"a\":1}\n```").unwrap();
        assert_eq!(v, serde_json::json!({"a": 1}));
    }

    #[test]
    fn no_fence() {
        assert_eq!(extract_code("just prose"), Err(ExtractError::NoFence));
        assert_eq!(extract_json("just prose"), Err(ExtractError::NoFence));
    }

    #[test]
    fn first_fence_wins() {
        let text = "a\n```python\nFIRST\n```\nb\n```python\nSECOND\n```";
        assert_eq!(extract_code(text).unwrap(), "FIRST");
        let text = "```json\n{\"s\":\"one\"}\n```\n```json\n{\"s\":\"two\"}\n```";
        assert_eq!(extract_json(text).unwrap()["s"], "one");
    }

    #[test]
    fn bad_json_reports_position() {
        match extract_json("```json\n{\"a\":\n```") {
            Err(ExtractError::ParseError { line, .. }) => assert!(line >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn task_type_parsing() {
        assert_eq!(parse_task_type("opt"), Ok(TaskType::Opt));
        assert_eq!(parse_task_type("Task type: ASSIST."), Ok(TaskType::Assist));
        assert!(matches!(parse_task_type("maybe"), Err(ExtractError::Unparsable(_))));
        assert_eq!(
            parse_task_type("```json\n{\"task_type\": \"optimization\"}\n```"),
            Ok(TaskType::Opt)
        );
        assert!(parse_task_type("assist or opt?").is_err());
    }

    proptest::proptest! {
        #[test]
        fn fenced_payload_round_trips(lines in proptest::collection::vec("[a-zA-Z0-9 =()\\[\\]\"'.,:_+-]{0,30}", 0..8)) {
            let body = lines.join("\n");
            proptest::prop_assume!(!lines.iter().any(|l| l.trim_start().starts_with("```")));
            let text = format!("Here you go:\n```python\n{body}\n```\nDone.");
            proptest::prop_assert_eq!(extract_code(&text).unwrap(), body);
        }
    }
}
