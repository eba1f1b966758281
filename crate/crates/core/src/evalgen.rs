//! Evaluator generation and the joint solver/evaluator referee loop.
//!
//! Optimization tasks get a planned, scored evaluator; assistant tasks get a
//! binary evaluator generated directly. When an evaluator run fails, the
//! referee attributes the fault and revises code under integrity checks that
//! stop the solver from learning the reference answer.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analyzer::{ProblemSpec, RefAnswer, TaskType};
use crate::executor::{truncate_diagnostics, EvaluatorError, ExecError, ExecutionResult, Executor};
use crate::llm::{extract_code, extract_json, extract_tagged, ExtractError, Gateway, LlmError, PromptId, Slots};
use crate::registry::{describe_for_prompt, ToolSet};
use crate::solver::{Validation, Validator};
use crate::template::{evaluator_violations, python_literals, solver_violations, TemplateError};
use crate::transcript::Transcript;

/// Cap on the result preview shown to evaluator and referee prompts.
const RESULT_PREVIEW_CAP: usize = 4096;
const TOOL_BUDGET: usize = 24_000;

#[derive(Debug, Error)]
pub enum EvalGenError {
    #[error("could not parse evaluator plan: {0}")]
    PlanParseError(String),
    #[error("could not extract evaluator code: {0}")]
    CodeExtractError(#[from] ExtractError),
    #[error("template violation: {}", .0.join("; "))]
    TemplateViolation(Vec<String>),
    #[error("could not parse referee verdict: {0}")]
    VerdictParseError(String),
    #[error("integrity violation: {0}")]
    IntegrityViolation(IntegrityViolation),
    #[error("verification exhausted after {rounds} referee rounds: {diagnostics}")]
    VerificationExhausted { rounds: usize, diagnostics: String },
    #[error("reference answer was modified during verification")]
    ReferenceTampered,
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("cannot read reference: {0}")]
    Io(#[from] std::io::Error),
}

impl From<TemplateError> for EvalGenError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::TemplateViolation(v) => EvalGenError::TemplateViolation(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "details", rename_all = "snake_case")]
pub enum IntegrityViolation {
    #[error("revised solver breaks the template: {}", .0.join("; "))]
    SolverLint(Vec<String>),
    #[error("revised solver embeds reference-answer literals: {}", .0.join(", "))]
    ReferenceLeak(Vec<String>),
    #[error("revised evaluator drops the output contract: {}", .0.join("; "))]
    EvaluatorContract(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Binary,
    Scored,
}

impl EvalMode {
    pub fn for_task(tau: TaskType) -> Self {
        match tau {
            TaskType::Assist => EvalMode::Binary,
            TaskType::Opt => EvalMode::Scored,
        }
    }

    pub fn is_binary(self) -> bool {
        self == EvalMode::Binary
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSubtask {
    pub description: String,
    #[serde(default)]
    pub tools: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPlan {
    pub subtasks: Vec<EvalSubtask>,
}

impl EvalPlan {
    pub fn render(&self) -> String {
        self.subtasks
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.tools.is_empty() {
                    format!("{}. {}\n", i + 1, s.description)
                } else {
                    format!("{}. {} [tools: {}]\n", i + 1, s.description, s.tools.join(", "))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorArtifact {
    pub code: String,
    pub mode: EvalMode,
    pub plan: Option<EvalPlan>,
    /// Transcript position of the reply that produced this code.
    pub provenance: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fault {
    Solver,
    Evaluator,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefereeVerdict {
    pub fault: Fault,
    pub revised_solver: String,
    pub revised_evaluator: String,
    pub justification: String,
}

impl RefereeVerdict {
    pub fn solver_changed(&self, before: &str) -> bool {
        self.revised_solver != before
    }

    pub fn evaluator_changed(&self, before: &str) -> bool {
        self.revised_evaluator != before
    }
}

fn tools_text(tools: &ToolSet) -> String {
    let text = describe_for_prompt(tools, TOOL_BUDGET);
    if text.is_empty() {
        "(no tools available)".into()
    } else {
        text
    }
}

/// JSON preview of a solver result for prompts.
pub fn result_preview(result: &ExecutionResult) -> String {
    let value = result.result_payload.clone().unwrap_or(Value::Null);
    let text = serde_json::to_string_pretty(&value).expect("json");
    if text.len() > RESULT_PREVIEW_CAP {
        let mut end = RESULT_PREVIEW_CAP;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}\n[... truncated ...]", &text[..end])
    } else {
        text
    }
}

pub fn parse_eval_plan(reply: &str, tools_eval: &ToolSet) -> Result<(EvalPlan, Vec<String>), EvalGenError> {
    let doc = extract_json(reply).map_err(|e| EvalGenError::PlanParseError(e.to_string()))?;
    let doc = match doc {
        Value::Array(items) => json!({ "subtasks": items }),
        other => other,
    };
    let mut plan: EvalPlan =
        serde_json::from_value(doc).map_err(|e| EvalGenError::PlanParseError(e.to_string()))?;
    if plan.subtasks.is_empty() {
        return Err(EvalGenError::PlanParseError("plan has no subtasks".into()));
    }
    let mut diagnostics = Vec::new();
    for sub in &mut plan.subtasks {
        sub.tools.retain(|name| {
            let known = tools_eval.contains(name);
            if !known {
                diagnostics.push(format!("evaluator plan references unknown tool `{name}`; dropped"));
            }
            known
        });
    }
    Ok((plan, diagnostics))
}

pub fn plan_evaluator(
    task: &str,
    goal: &str,
    reference_descriptor: &str,
    tools_eval: &ToolSet,
    solver_code: &str,
    gateway: &Gateway,
    transcript: &mut Transcript,
) -> Result<EvalPlan, EvalGenError> {
    let slots = Slots::from([
        ("task".to_string(), task.to_string()),
        ("goal".to_string(), goal.to_string()),
        ("reference".to_string(), reference_descriptor.to_string()),
        ("tools".to_string(), tools_text(tools_eval)),
        ("solver".to_string(), solver_code.to_string()),
    ]);
    let reply = gateway.ask(PromptId::PlanEval, &slots, transcript)?;
    let (plan, diagnostics) = parse_eval_plan(&reply, tools_eval)?;
    for d in diagnostics {
        transcript.diagnostic("plan_evaluator", d);
    }
    Ok(plan)
}

/// Extracts and lints evaluator code from a reply.
pub fn accept_evaluator(reply: &str, tools_eval: &ToolSet) -> Result<String, EvalGenError> {
    let code = extract_code(reply)?;
    let v = evaluator_violations(&code, tools_eval);
    if v.is_empty() {
        Ok(code)
    } else {
        Err(EvalGenError::TemplateViolation(v))
    }
}

pub fn generate_evaluator(
    spec: &ProblemSpec,
    solver_code: &str,
    solver_result: &ExecutionResult,
    plan: Option<&EvalPlan>,
    reference_descriptor: &str,
    gateway: &Gateway,
    transcript: &mut Transcript,
) -> Result<EvaluatorArtifact, EvalGenError> {
    let mode = EvalMode::for_task(spec.tau);
    let mut slots = Slots::from([
        ("task".to_string(), spec.t.clone()),
        ("tools".to_string(), tools_text(&spec.tools_eval)),
        ("solver".to_string(), solver_code.to_string()),
        ("result".to_string(), result_preview(solver_result)),
    ]);
    let id = match mode {
        EvalMode::Binary => PromptId::GenEvalAssist,
        EvalMode::Scored => {
            slots.insert("goal".into(), spec.g.clone());
            slots.insert("reference".into(), reference_descriptor.to_string());
            slots.insert(
                "plan".into(),
                plan.map(EvalPlan::render).unwrap_or_else(|| "(no plan)".into()),
            );
            PromptId::GenEval
        }
    };
    let reply = gateway.ask(id, &slots, transcript)?;
    let code = accept_evaluator(&reply, &spec.tools_eval)?;
    Ok(EvaluatorArtifact {
        code,
        mode,
        plan: plan.cloned(),
        provenance: transcript.len().saturating_sub(1),
    })
}

/// An atom of the reference answer that must not leak into solver code.
#[derive(Debug, Clone, PartialEq)]
pub enum RefAtom {
    /// Must equal a string literal.
    Text(String),
    /// Must appear inside a string literal (file names and paths).
    PathFragment(String),
    Number(f64),
}

impl RefAtom {
    fn label(&self) -> String {
        match self {
            RefAtom::Text(s) | RefAtom::PathFragment(s) => format!("{s:?}"),
            RefAtom::Number(x) => x.to_string(),
        }
    }
}

fn flatten_atoms(v: &Value, out: &mut Vec<RefAtom>) {
    match v {
        Value::String(s) if !s.is_empty() => out.push(RefAtom::Text(s.clone())),
        Value::Number(n) => {
            if let Some(x) = n.as_f64() {
                // 0 and 1 are too common in code to signal a leak
                if x != 0.0 && x != 1.0 {
                    out.push(RefAtom::Number(x));
                }
            }
        }
        Value::Array(items) => items.iter().for_each(|i| flatten_atoms(i, out)),
        Value::Object(map) => map.values().for_each(|i| flatten_atoms(i, out)),
        _ => {}
    }
}

/// Atoms of the reference answer. File references contribute their names
/// and paths, inline answers their scalar leaves.
pub fn reference_atoms(a_ref: &RefAnswer, private_path: Option<&Path>) -> Vec<RefAtom> {
    let mut out = Vec::new();
    match a_ref {
        RefAnswer::None => {}
        RefAnswer::Inline(v) => flatten_atoms(v, &mut out),
        RefAnswer::File(p) => {
            if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
                out.push(RefAtom::PathFragment(name.to_string()));
            }
            out.push(RefAtom::PathFragment(p.display().to_string()));
        }
    }
    if let Some(p) = private_path {
        if !a_ref.is_none() {
            out.push(RefAtom::PathFragment(p.display().to_string()));
            if let Some(dir) = p.parent() {
                out.push(RefAtom::PathFragment(dir.display().to_string()));
            }
        }
    }
    out
}

fn atom_present(atom: &RefAtom, lits: &crate::template::Literals) -> bool {
    match atom {
        RefAtom::Text(s) => lits.strings.contains(s),
        RefAtom::PathFragment(s) => lits.strings.iter().any(|l| l.contains(s.as_str())),
        RefAtom::Number(x) => lits.has_number(*x) || lits.has_number(-*x),
    }
}

/// Rejects `after` when it carries a reference atom as a literal that
/// `before` did not already carry.
pub fn check_reference_leak(before: &str, after: &str, atoms: &[RefAtom]) -> Result<(), IntegrityViolation> {
    let lits_before = python_literals(before);
    let lits_after = python_literals(after);
    let leaked: Vec<String> = atoms
        .iter()
        .filter(|a| atom_present(a, &lits_after) && !atom_present(a, &lits_before))
        .map(RefAtom::label)
        .collect();
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(IntegrityViolation::ReferenceLeak(leaked))
    }
}

/// All post-hoc integrity checks on a verdict.
pub fn check_integrity(
    spec: &ProblemSpec,
    solver_before: &str,
    verdict: &RefereeVerdict,
    atoms: &[RefAtom],
) -> Result<(), IntegrityViolation> {
    let lint = solver_violations(&verdict.revised_solver, &spec.tools_solve);
    if !lint.is_empty() {
        return Err(IntegrityViolation::SolverLint(lint));
    }
    check_reference_leak(solver_before, &verdict.revised_solver, atoms)?;
    let contract = evaluator_violations(&verdict.revised_evaluator, &spec.tools_eval);
    if !contract.is_empty() {
        return Err(IntegrityViolation::EvaluatorContract(contract));
    }
    Ok(())
}

/// Parses a referee reply: a JSON verdict plus optional `solver` and
/// `evaluator` fences.
pub fn parse_verdict(reply: &str, solver: &str, evaluator: &str) -> Result<RefereeVerdict, EvalGenError> {
    let doc = extract_json(reply).map_err(|e| EvalGenError::VerdictParseError(e.to_string()))?;
    let fault: Fault = doc
        .get("fault")
        .cloned()
        .and_then(|f| serde_json::from_value(f).ok())
        .ok_or_else(|| EvalGenError::VerdictParseError("missing or invalid `fault`".into()))?;
    let justification = doc
        .get("justification")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let new_solver = extract_tagged(reply, "solver");
    let new_evaluator = extract_tagged(reply, "evaluator");
    if new_solver.is_none() && new_evaluator.is_none() {
        return Err(EvalGenError::VerdictParseError("verdict revises neither side".into()));
    }
    if fault == Fault::Interaction && (new_solver.is_none() || new_evaluator.is_none()) {
        return Err(EvalGenError::VerdictParseError(
            "interaction fault requires both revisions".into(),
        ));
    }
    let verdict = RefereeVerdict {
        fault,
        revised_solver: new_solver.unwrap_or_else(|| solver.to_string()),
        revised_evaluator: new_evaluator.unwrap_or_else(|| evaluator.to_string()),
        justification,
    };
    if fault != Fault::Interaction && !verdict.solver_changed(solver) && !verdict.evaluator_changed(evaluator) {
        return Err(EvalGenError::VerdictParseError("verdict changes nothing".into()));
    }
    Ok(verdict)
}

/// Asks the referee for a diagnosis of `error` and checks the verdict.
#[allow(clippy::too_many_arguments)]
pub fn referee_debug(
    spec: &ProblemSpec,
    solver_code: &str,
    solver_result: &ExecutionResult,
    evaluator: &EvaluatorArtifact,
    error: &str,
    atoms: &[RefAtom],
    gateway: &Gateway,
    transcript: &mut Transcript,
) -> Result<RefereeVerdict, EvalGenError> {
    let slots = Slots::from([
        ("task".to_string(), spec.t.clone()),
        ("solver".to_string(), solver_code.to_string()),
        ("result".to_string(), result_preview(solver_result)),
        ("tools".to_string(), tools_text(&spec.tools_eval)),
        ("evaluator".to_string(), evaluator.code.clone()),
        ("error".to_string(), truncate_diagnostics(error, crate::executor::ERROR_CAP)),
    ]);
    let reply = gateway.ask(PromptId::Ref, &slots, transcript)?;
    let verdict = parse_verdict(&reply, solver_code, &evaluator.code)?;
    check_integrity(spec, solver_code, &verdict, atoms).map_err(EvalGenError::IntegrityViolation)?;
    Ok(verdict)
}

pub fn file_digest(path: &Path) -> Result<[u8; 32], std::io::Error> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).into())
}

/// Context shared by verification runs.
pub struct VerifyContext<'a> {
    pub spec: &'a ProblemSpec,
    pub reference_path: &'a Path,
    pub executor: &'a Executor,
    pub gateway: &'a Gateway,
    pub kwargs: &'a Map<String, Value>,
    pub max_referee: usize,
}

#[derive(Debug, Clone)]
pub struct VerifiedPair {
    pub solver: String,
    pub evaluator: EvaluatorArtifact,
    pub result: ExecutionResult,
    pub score: f64,
    pub rounds: usize,
}

/// Runs the evaluator; on failure consults the referee and re-executes the
/// revised side(s) until evaluation succeeds or the round budget runs out.
pub fn verify_pair(
    solver_code: &str,
    solver_result: &ExecutionResult,
    evaluator: &EvaluatorArtifact,
    ctx: &VerifyContext<'_>,
    transcript: &mut Transcript,
) -> Result<VerifiedPair, EvalGenError> {
    let digest_before = file_digest(ctx.reference_path)?;
    let atoms = reference_atoms(&ctx.spec.a_ref, Some(ctx.reference_path));
    let mut solver = solver_code.to_string();
    let mut result = solver_result.clone();
    let mut artifact = evaluator.clone();
    let mut rounds = 0;
    let mut pending: Option<String> = None;
    let outcome = loop {
        if pending.is_none() {
            let label = format!("evaluate-r{rounds}");
            match ctx.executor.run_evaluator(
                &artifact.code,
                &result.result_path(),
                ctx.reference_path,
                &ctx.spec.tools_eval,
                artifact.mode.is_binary(),
            ) {
                Ok(score) => {
                    transcript.evaluation(&label, Some(score.value), None);
                    break Ok(VerifiedPair {
                        solver,
                        evaluator: artifact,
                        result,
                        score: score.value,
                        rounds,
                    });
                }
                Err(EvaluatorError::Exec(e)) => break Err(EvalGenError::Exec(e)),
                Err(e) => {
                    transcript.evaluation(&label, None, Some(e.diagnostics()));
                    pending = Some(e.diagnostics());
                }
            }
        }
        let error = pending.clone().unwrap_or_default();
        if rounds == ctx.max_referee {
            break Err(EvalGenError::VerificationExhausted {
                rounds,
                diagnostics: error,
            });
        }
        rounds += 1;
        let verdict = match referee_debug(
            ctx.spec,
            &solver,
            &result,
            &artifact,
            &error,
            &atoms,
            ctx.gateway,
            transcript,
        ) {
            Ok(v) => v,
            Err(e @ (EvalGenError::Llm(_) | EvalGenError::Exec(_))) => break Err(e),
            Err(e) => {
                transcript.diagnostic("referee", e.to_string());
                pending = Some(format!("{error}\n\nThe previous referee reply was rejected: {e}"));
                continue;
            }
        };
        transcript.stage(
            "referee_verdict",
            json!({"round": rounds, "fault": verdict.fault, "justification": verdict.justification}),
        );
        if verdict.evaluator_changed(&artifact.code) || verdict.fault == Fault::Interaction {
            artifact.code = verdict.revised_evaluator.clone();
            artifact.provenance = transcript.len().saturating_sub(1);
        }
        if verdict.solver_changed(&solver) || verdict.fault == Fault::Interaction {
            solver = verdict.revised_solver.clone();
            let label = format!("referee-solve-r{rounds}");
            let rerun = match ctx.executor.run_solver(&label, &solver, &ctx.spec.tools_solve, ctx.kwargs) {
                Ok(r) => r,
                Err(e) => break Err(EvalGenError::Exec(e)),
            };
            transcript.execution(&label, &rerun);
            if !rerun.is_ok() {
                pending = Some(format!("The revised solver failed to execute:\n{}", rerun.diagnostics()));
                continue;
            }
            result = rerun;
        }
        pending = None;
    };
    if file_digest(ctx.reference_path)? != digest_before {
        return Err(EvalGenError::ReferenceTampered);
    }
    outcome
}

/// Validator used by the solve loop: generates the evaluator on first use,
/// then verifies each clean candidate against it.
pub struct EvaluatorGate<'a> {
    pub ctx: VerifyContext<'a>,
    pub reference_descriptor: String,
    pub evaluator: Option<EvaluatorArtifact>,
}

impl<'a> EvaluatorGate<'a> {
    pub fn new(ctx: VerifyContext<'a>, reference_descriptor: String) -> Self {
        Self {
            ctx,
            reference_descriptor,
            evaluator: None,
        }
    }

    fn obtain(
        &mut self,
        spec: &ProblemSpec,
        code: &str,
        result: &ExecutionResult,
        transcript: &mut Transcript,
    ) -> Result<EvaluatorArtifact, EvalGenError> {
        if let Some(e) = &self.evaluator {
            return Ok(e.clone());
        }
        let plan = match spec.tau {
            TaskType::Opt => Some(plan_evaluator(
                &spec.t,
                &spec.g,
                &self.reference_descriptor,
                &spec.tools_eval,
                code,
                self.ctx.gateway,
                transcript,
            )?),
            TaskType::Assist => None,
        };
        generate_evaluator(
            spec,
            code,
            result,
            plan.as_ref(),
            &self.reference_descriptor,
            self.ctx.gateway,
            transcript,
        )
    }
}

impl Validator for EvaluatorGate<'_> {
    fn validate(
        &mut self,
        spec: &ProblemSpec,
        code: &str,
        result: &ExecutionResult,
        transcript: &mut Transcript,
    ) -> Validation {
        let failed = |detail: String| Validation {
            score: None,
            code: code.to_string(),
            result: result.clone(),
            detail: Some(detail),
        };
        let artifact = match self.obtain(spec, code, result, transcript) {
            Ok(a) => a,
            Err(e) => return failed(e.to_string()),
        };
        match verify_pair(code, result, &artifact, &self.ctx, transcript) {
            Ok(pair) => {
                self.evaluator = Some(pair.evaluator);
                Validation {
                    score: Some(pair.score),
                    code: pair.solver,
                    result: pair.result,
                    detail: (pair.rounds > 0).then(|| format!("{} referee rounds", pair.rounds)),
                }
            }
            Err(e) => {
                self.evaluator = None;
                failed(e.to_string())
            }
        }
    }
}

/// Writes the reference into the run's private directory and returns its path.
pub fn stash_reference(a_ref: &RefAnswer, private_dir: &Path) -> Result<PathBuf, std::io::Error> {
    a_ref.materialize(private_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::tests::{toolset, SAMPLE};

    fn spec_with(a_ref: RefAnswer) -> ProblemSpec {
        ProblemSpec {
            tau: TaskType::Opt,
            t: "t".into(),
            g: "g".into(),
            a_ref,
            tools_solve: toolset(&["SpectraToSmiles"]),
            tools_eval: toolset(&["SpectraToSmiles"]),
            raw_query: "q".into(),
        }
    }

    const EVAL: &str = "import json\na = json.load(open('args.json'))\nr = json.load(open(a['result_path']))\njson.dump({'score': 1}, open('score.json', 'w'))\n";

    #[test]
    fn eval_plan_validates_tools() {
        let tools = toolset(&["Checker"]);
        let reply = "```json\n{\"subtasks\": [{\"description\": \"load\", \"tools\": [\"Checker\"]}, {\"description\": \"score\", \"tools\": [\"Nope\"]}]}\n```";
        let (plan, diags) = parse_eval_plan(reply, &tools).unwrap();
        assert_eq!(plan.subtasks.len(), 2);
        assert!(plan.subtasks[1].tools.is_empty());
        assert_eq!(diags.len(), 1);
        assert!(matches!(parse_eval_plan("nope", &tools), Err(EvalGenError::PlanParseError(_))));
    }

    #[test]
    fn evaluator_must_write_score() {
        let tools = toolset(&[]);
        let reply = "```python\nprint('no score here', result_path)\n```";
        assert!(matches!(accept_evaluator(reply, &tools), Err(EvalGenError::TemplateViolation(_))));
        assert!(accept_evaluator(&format!("```python\n{EVAL}```"), &tools).is_ok());
    }

    #[test]
    fn verdict_parsing() {
        let fixed_eval = EVAL.replace("'score': 1", "'score': 1.0");
        let reply = format!(
            "```json\n{{\"fault\": \"evaluator\", \"justification\": \"key mismatch\"}}\n```\n```evaluator\n{fixed_eval}```\n"
        );
        let v = parse_verdict(&reply, SAMPLE, EVAL).unwrap();
        assert_eq!(v.fault, Fault::Evaluator);
        assert!(!v.solver_changed(SAMPLE));
        assert!(v.evaluator_changed(EVAL));

        let both = format!(
            "```json\n{{\"fault\": \"interaction\", \"justification\": \"\"}}\n```\n```solver\n{SAMPLE}```\n```evaluator\n{EVAL}```\n"
        );
        assert_eq!(parse_verdict(&both, SAMPLE, EVAL).unwrap().fault, Fault::Interaction);
        let half = format!("```json\n{{\"fault\": \"interaction\"}}\n```\n```solver\n{SAMPLE}```\n");
        assert!(parse_verdict(&half, SAMPLE, EVAL).is_err());
        assert!(parse_verdict("```json\n{\"fault\": \"solver\"}\n```", SAMPLE, EVAL).is_err());
    }

    #[test]
    fn leak_detection_both_directions() {
        let atoms = reference_atoms(&RefAnswer::Inline(json!(["CCO", 0.535])), None);
        let leaky = SAMPLE.replace("return out", "return [\"CCO\"]");
        assert!(matches!(
            check_reference_leak(SAMPLE, &leaky, &atoms),
            Err(IntegrityViolation::ReferenceLeak(_))
        ));
        assert!(check_reference_leak(SAMPLE, SAMPLE, &atoms).is_ok());
        let numeric = SAMPLE.replace("return out", "return 0.535");
        assert!(check_reference_leak(SAMPLE, &numeric, &atoms).is_err());
        // already present before the revision: not a new leak
        assert!(check_reference_leak(&leaky, &leaky, &atoms).is_ok());
    }

    #[test]
    fn file_reference_paths_are_atoms() {
        let a = RefAnswer::File(PathBuf::from("/data/answers.npy"));
        let atoms = reference_atoms(&a, Some(Path::new("/run/private/answers.npy")));
        let leaky = SAMPLE.replace("return out", "return open('/run/private/answers.npy').read()");
        assert!(check_reference_leak(SAMPLE, &leaky, &atoms).is_err());
        let by_name = SAMPLE.replace("return out", "return 'answers.npy'");
        assert!(check_reference_leak(SAMPLE, &by_name, &atoms).is_err());
    }

    #[test]
    fn integrity_rejects_lint_and_contract_breaks() {
        let spec = spec_with(RefAnswer::None);
        let verdict = RefereeVerdict {
            fault: Fault::Solver,
            revised_solver: SAMPLE.replace("def solve(", "def other("),
            revised_evaluator: EVAL.into(),
            justification: String::new(),
        };
        assert!(matches!(
            check_integrity(&spec, SAMPLE, &verdict, &[]),
            Err(IntegrityViolation::SolverLint(_))
        ));
        let verdict = RefereeVerdict {
            revised_solver: SAMPLE.into(),
            revised_evaluator: "print(1)".into(),
            ..verdict
        };
        assert!(matches!(
            check_integrity(&spec, SAMPLE, &verdict, &[]),
            Err(IntegrityViolation::EvaluatorContract(_))
        ));
    }
}
