//! Keyword-argument extraction for test instances.

use serde_json::{Map, Value};

use super::BenchError;
use crate::llm::{fences, Gateway, PromptId, Slots};
use crate::pylit;
use crate::template::parse_header;
use crate::transcript::Transcript;

const DICT_TAGS: [&str; 4] = ["python", "py", "json", ""];

/// Parses the first python/json fence of `reply` as a dict.
pub fn parse_kwargs_reply(reply: &str) -> Result<Map<String, Value>, BenchError> {
    let fence = fences(reply)
        .into_iter()
        .find(|f| DICT_TAGS.iter().any(|t| f.tag.eq_ignore_ascii_case(t)))
        .ok_or_else(|| BenchError::KwargsParseError("reply has no fenced dictionary".into()))?;
    let body = fence.body.trim();
    let value = match pylit::parse(body) {
        Ok(v) => v,
        Err(py) => serde_json::from_str(body).map_err(|_| BenchError::KwargsParseError(py.to_string()))?,
    };
    match value {
        Value::Object(map) => Ok(map),
        other => Err(BenchError::KwargsParseError(format!("expected a dictionary, got {other}"))),
    }
}

/// Keeps the keys declared in `code`'s parameter header; returns the
/// filtered map and one diagnostic per dropped key.
pub fn filter_declared(code: &str, kwargs: Map<String, Value>) -> Result<(Map<String, Value>, Vec<String>), BenchError> {
    let header = parse_header(code)
        .ok_or_else(|| BenchError::KwargsParseError("solver has no parameter header".into()))?;
    let mut kept = Map::new();
    let mut dropped = Vec::new();
    for (k, v) in kwargs {
        if header.iter().any(|p| p.name == k) {
            kept.insert(k, v);
        } else {
            dropped.push(format!("dropped undeclared parameter `{k}`"));
        }
    }
    Ok((kept, dropped))
}

/// Asks the model which of the solver's parameters `question` pins down.
pub fn extract_kwargs(
    question: &str,
    solver_code: &str,
    gateway: &Gateway,
    transcript: &mut Transcript,
) -> Result<Map<String, Value>, BenchError> {
    if parse_header(solver_code).is_none() {
        return Err(BenchError::KwargsParseError("solver has no parameter header".into()));
    }
    let slots: Slots = [("question", question), ("code", solver_code)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let reply = gateway.ask(PromptId::Param, &slots, transcript)?;
    let (kept, dropped) = filter_declared(solver_code, parse_kwargs_reply(&reply)?)?;
    for d in dropped {
        transcript.diagnostic("kwargs", d);
    }
    Ok(kept)
}
