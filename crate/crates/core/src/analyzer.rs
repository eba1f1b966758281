//! Problem analysis: classify the query, formalize optimization tasks into
//! five elements, compose the task description and attach retrieved tools.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::llm::{extract_json, parse_task_type, Gateway, LlmError, PromptId, Slots};
use crate::registry::{resolve_tools, Registry, RegistryError, ToolKind, ToolSet};
use crate::retrieval::{top_k_tools, Embedder, RetrievalError, VectorIndex};
use crate::transcript::Transcript;

pub const LABEL_INPUTS: &str = "Inputs:";
pub const LABEL_OUTPUT: &str = "Output Format:";
pub const LABEL_INSTRUCTIONS: &str = "Instructions:";

/// Reference file name used for inline reference answers.
pub const REFERENCE_FILE: &str = "reference.json";

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("classification failed after retry: {0}")]
    ClassificationFailed(String),
    #[error("could not parse formalization: {0}")]
    FormalizeParseError(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("cannot store reference answer: {0}")]
    Reference(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Assist,
    Opt,
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskType::Assist => "assist",
            TaskType::Opt => "opt",
        })
    }
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "assist" => Ok(TaskType::Assist),
            "opt" => Ok(TaskType::Opt),
            other => Err(format!("unknown task type `{other}`")),
        }
    }
}

/// The five structured elements of an optimization query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptElements {
    #[serde(rename = "I_in")]
    pub i_in: String,
    #[serde(rename = "I_out")]
    pub i_out: String,
    #[serde(rename = "I_inst")]
    pub i_inst: String,
    pub g_raw: String,
    pub a_gt: Value,
}

/// The reference answer, kept away from every solver-facing prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum RefAnswer {
    None,
    Inline(Value),
    File(PathBuf),
}

impl RefAnswer {
    /// Interprets `a_gt`: a string naming an existing file under `base_dir`
    /// becomes a file reference, anything else is inline.
    pub fn from_payload(a_gt: Value, base_dir: &Path) -> Self {
        if let Value::String(s) = &a_gt {
            let candidate = base_dir.join(s.trim());
            if !s.trim().is_empty() && candidate.is_file() {
                return RefAnswer::File(candidate);
            }
        }
        RefAnswer::Inline(a_gt)
    }

    pub fn is_none(&self) -> bool {
        matches!(self, RefAnswer::None)
    }

    /// Copies the reference into `private_dir` and returns the private path.
    pub fn materialize(&self, private_dir: &Path) -> Result<PathBuf, std::io::Error> {
        fs::create_dir_all(private_dir)?;
        match self {
            RefAnswer::File(src) => {
                let name = src.file_name().map(PathBuf::from).unwrap_or_else(|| REFERENCE_FILE.into());
                let dest = private_dir.join(name);
                fs::copy(src, &dest)?;
                Ok(dest)
            }
            RefAnswer::Inline(v) => {
                let dest = private_dir.join(REFERENCE_FILE);
                fs::write(&dest, serde_json::to_string_pretty(v).expect("json"))?;
                Ok(dest)
            }
            RefAnswer::None => {
                let dest = private_dir.join(REFERENCE_FILE);
                fs::write(&dest, "null")?;
                Ok(dest)
            }
        }
    }

    /// What evaluator prompts may see: location and format, never values.
    pub fn descriptor(&self, private_path: &Path) -> String {
        let format = match self {
            RefAnswer::None => "no reference answer (JSON null)".to_string(),
            RefAnswer::Inline(v) => format!("JSON document holding a {}", json_kind(v)),
            RefAnswer::File(p) => match p.extension().and_then(|e| e.to_str()) {
                Some(ext) => format!("file with extension .{ext}"),
                None => "file".to_string(),
            },
        };
        format!("path: {} ({format})", private_path.display())
    }
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "list",
        Value::Object(_) => "mapping",
    }
}

/// The analyzed task.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub tau: TaskType,
    pub t: String,
    pub g: String,
    pub a_ref: RefAnswer,
    pub tools_solve: ToolSet,
    pub tools_eval: ToolSet,
    pub raw_query: String,
}

impl ProblemSpec {
    /// Public summary for transcripts (no reference answer).
    pub fn summary(&self) -> Value {
        json!({
            "tau": self.tau,
            "T": self.t,
            "G": self.g,
            "has_reference": !self.a_ref.is_none(),
            "tools_solve": self.tools_solve.names(),
            "tools_eval": self.tools_eval.names(),
        })
    }
}

fn question_slots(q: &str) -> Slots {
    Slots::from([("question".to_string(), q.to_string())])
}

/// Classifies `q`, asking once more when the first reply is unparsable.
pub fn classify(q: &str, gateway: &Gateway, transcript: &mut Transcript) -> Result<TaskType, AnalyzerError> {
    if q.trim().is_empty() {
        return Err(AnalyzerError::EmptyQuery);
    }
    let slots = question_slots(q);
    let mut last = String::new();
    for _ in 0..2 {
        let reply = gateway.ask(PromptId::Cls, &slots, transcript)?;
        match parse_task_type(&reply) {
            Ok(t) => return Ok(t),
            Err(e) => {
                transcript.diagnostic("classify", format!("unparsable classification: {e}"));
                last = reply;
            }
        }
    }
    Err(AnalyzerError::ClassificationFailed(last))
}

/// Parses the five elements from a fenced JSON reply.
pub fn parse_elements(reply: &str) -> Result<OptElements, AnalyzerError> {
    let doc = extract_json(reply).map_err(|e| AnalyzerError::FormalizeParseError(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| AnalyzerError::FormalizeParseError("reply is not a JSON object".into()))?;
    let text = |key: &str| -> Result<String, AnalyzerError> {
        match obj.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(Value::Null) | None => Err(AnalyzerError::FormalizeParseError(format!("missing key `{key}`"))),
            Some(other) => Ok(other.to_string()),
        }
    };
    let a_gt = match obj.get("a_gt") {
        None | Some(Value::Null) => {
            return Err(AnalyzerError::FormalizeParseError("missing key `a_gt`".into()))
        }
        Some(v) => v.clone(),
    };
    Ok(OptElements {
        i_in: text("I_in")?,
        i_out: text("I_out")?,
        i_inst: text("I_inst")?,
        g_raw: text("g_raw")?,
        a_gt,
    })
}

pub fn formalize(q: &str, gateway: &Gateway, transcript: &mut Transcript) -> Result<OptElements, AnalyzerError> {
    let reply = gateway.ask(PromptId::Fm, &question_slots(q), transcript)?;
    parse_elements(&reply)
}

/// Builds `(T, G, A_ref)` from the elements.
pub fn compose_spec(elements: &OptElements) -> (String, String, Value) {
    let t = format!(
        "{LABEL_INPUTS} {} {LABEL_OUTPUT} {} {LABEL_INSTRUCTIONS} {}",
        elements.i_in, elements.i_out, elements.i_inst
    );
    (t, elements.g_raw.clone(), elements.a_gt.clone())
}

/// Inverse of [`compose_spec`] for texts whose elements do not contain the
/// labels themselves.
pub fn split_spec(t: &str) -> Option<(String, String, String)> {
    let rest = t.strip_prefix(LABEL_INPUTS)?.strip_prefix(' ')?;
    let out_at = rest.find(&format!(" {LABEL_OUTPUT} "))?;
    let i_in = &rest[..out_at];
    let rest = &rest[out_at + LABEL_OUTPUT.len() + 2..];
    let inst_at = rest.find(&format!(" {LABEL_INSTRUCTIONS} "))?;
    let i_out = &rest[..inst_at];
    let i_inst = &rest[inst_at + LABEL_INSTRUCTIONS.len() + 2..];
    Some((i_in.to_string(), i_out.to_string(), i_inst.to_string()))
}

/// Options for [`analyze`].
pub struct AnalyzeOptions<'a> {
    pub k: usize,
    /// Skips classification when set.
    pub forced_type: Option<TaskType>,
    /// Directory against which file references in the query resolve.
    pub base_dir: &'a Path,
}

/// End-to-end analysis of `q`.
pub fn analyze(
    q: &str,
    registry: &Registry,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    gateway: &Gateway,
    opts: &AnalyzeOptions<'_>,
    transcript: &mut Transcript,
) -> Result<ProblemSpec, AnalyzerError> {
    if q.trim().is_empty() {
        return Err(AnalyzerError::EmptyQuery);
    }
    let tau = match opts.forced_type {
        Some(t) => t,
        None => classify(q, gateway, transcript)?,
    };
    let (t, g, a_ref) = match tau {
        TaskType::Assist => (q.to_string(), String::new(), RefAnswer::None),
        TaskType::Opt => {
            let elements = formalize(q, gateway, transcript)?;
            let (t, g, a_gt) = compose_spec(&elements);
            (t, g, RefAnswer::from_payload(a_gt, opts.base_dir))
        }
    };
    let hits = if index.is_empty() {
        Vec::new()
    } else {
        top_k_tools(q, embedder, index, opts.k)?
    };
    let names: Vec<String> = hits.into_iter().map(|(n, _)| n).collect();
    let resolution = resolve_tools(&names, registry, ToolKind::Solve, false)?;
    for name in &resolution.unresolved {
        transcript.diagnostic("analyze", format!("retrieved tool `{name}` is not in the registry"));
    }
    let tools_solve = resolution.tools;
    let mut tools_eval = registry.eval_tools();
    tools_eval.extend_from(&tools_solve);
    let spec = ProblemSpec {
        tau,
        t,
        g,
        a_ref,
        tools_solve,
        tools_eval,
        raw_query: q.to_string(),
    };
    transcript.stage("analyze", spec.summary());
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn elements(a: &str, b: &str, c: &str) -> OptElements {
        OptElements {
            i_in: a.into(),
            i_out: b.into(),
            i_inst: c.into(),
            g_raw: "maximize".into(),
            a_gt: json!([1, 2]),
        }
    }

    #[test]
    fn compose_examples() {
        let (t, g, a) = compose_spec(&elements("a", "b", "c"));
        assert_eq!(t, "Inputs: a Output Format: b Instructions: c");
        assert_eq!(g, "maximize");
        assert_eq!(a, json!([1, 2]));
        let (t, _, _) = compose_spec(&elements("", "", ""));
        assert_eq!(t, "Inputs:  Output Format:  Instructions: ");
    }

    #[test]
    fn parse_all_five_keys() {
        let reply = "```json\n{\"I_in\": \"spectra\", \"I_out\": \"smiles list\", \"I_inst\": \"predict\", \"g_raw\": \"top-10 accuracy\", \"a_gt\": \"spectra_train.npy\"}\n```";
        let e = parse_elements(reply).unwrap();
        assert_eq!(e.i_in, "spectra");
        assert_eq!(e.a_gt, json!("spectra_train.npy"));
    }

    #[test]
    fn missing_key_is_named() {
        let reply = "```json\n{\"I_in\": \"a\", \"I_out\": \"b\", \"I_inst\": \"c\", \"a_gt\": 1}\n```";
        match parse_elements(reply) {
            Err(AnalyzerError::FormalizeParseError(m)) => assert!(m.contains("g_raw")),
            other => panic!("{other:?}"),
        }
        assert!(parse_elements("no json here").is_err());
    }

    #[test]
    fn file_reference_resolution() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("spectra_train.npy"), b"data").unwrap();
        let r = RefAnswer::from_payload(json!("spectra_train.npy"), dir.path());
        assert_eq!(r, RefAnswer::File(dir.path().join("spectra_train.npy")));
        let private = dir.path().join("private");
        let p = r.materialize(&private).unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"data");
        assert!(r.descriptor(&p).contains(".npy"));

        let inline = RefAnswer::from_payload(json!("missing.npy"), dir.path());
        assert_eq!(inline, RefAnswer::Inline(json!("missing.npy")));
        let p = inline.materialize(&private).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "\"missing.npy\"");
        assert!(!inline.descriptor(&private).contains("missing.npy"));
    }

    #[test]
    fn task_type_text() {
        assert_eq!("Opt".parse::<TaskType>().unwrap(), TaskType::Opt);
        assert_eq!(TaskType::Assist.to_string(), "assist");
        assert_eq!(serde_json::to_value(TaskType::Opt).unwrap(), json!("opt"));
    }

    proptest! {
        #[test]
        fn compose_split_round_trip(a in "[a-z0-9 ,.]{0,20}", b in "[a-z0-9 ,.]{0,20}", c in "[a-z0-9 ,.]{0,20}") {
            let (t, _, _) = compose_spec(&elements(&a, &b, &c));
            prop_assert_eq!(split_spec(&t), Some((a, b, c)));
        }
    }
}
