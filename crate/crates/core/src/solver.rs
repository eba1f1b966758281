//! Problem solving: plan, generate within the code template, execute and
//! debug, and re-plan when validation fails.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::analyzer::{ProblemSpec, TaskType};
use crate::executor::{ExecError, ExecutionResult, Executor};
use crate::llm::{extract_code, extract_json, ExtractError, Gateway, LlmError, PromptId, Slots};
use crate::registry::{describe_for_prompt, ToolSet};
use crate::template::{lint_solver, CodeTemplate, TemplateError};
use crate::transcript::Transcript;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("could not parse plan: {0}")]
    PlanParseError(String),
    #[error("could not extract code: {0}")]
    CodeExtractError(#[from] ExtractError),
    #[error("template violation: {}", .0.join("; "))]
    TemplateViolation(Vec<String>),
    #[error("all solve cycles failed")]
    SolveExhausted(Option<Box<SolveOutcome>>),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl From<TemplateError> for SolverError {
    fn from(e: TemplateError) -> Self {
        match e {
            TemplateError::TemplateViolation(v) => SolverError::TemplateViolation(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_debug: usize,
    pub max_cycles: usize,
    /// Character budget for tool descriptions in prompts.
    pub tool_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_debug: 3,
            max_cycles: 3,
            tool_budget: 24_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub description: String,
    #[serde(default)]
    pub tools: Vec<String>,
    #[serde(default)]
    pub packages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub subtasks: Vec<Subtask>,
    #[serde(default)]
    pub rationale: String,
}

impl Plan {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.subtasks.iter().enumerate() {
            out.push_str(&format!("{}. {}", i + 1, s.description));
            if !s.tools.is_empty() {
                out.push_str(&format!(" [tools: {}]", s.tools.join(", ")));
            }
            if !s.packages.is_empty() {
                out.push_str(&format!(" [packages: {}]", s.packages.join(", ")));
            }
            out.push('\n');
        }
        if !self.rationale.is_empty() {
            out.push_str(&format!("Rationale: {}\n", self.rationale));
        }
        out
    }
}

/// Parses a plan reply and drops tool names missing from `tools`, returning
/// one diagnostic per dropped name.
pub fn parse_plan(reply: &str, tools: &ToolSet) -> Result<(Plan, Vec<String>), SolverError> {
    let doc = extract_json(reply).map_err(|e| SolverError::PlanParseError(e.to_string()))?;
    let doc = match doc {
        Value::Array(items) => json!({ "subtasks": items }),
        other => other,
    };
    let mut plan: Plan =
        serde_json::from_value(doc).map_err(|e| SolverError::PlanParseError(e.to_string()))?;
    if plan.subtasks.is_empty() {
        return Err(SolverError::PlanParseError("plan has no subtasks".into()));
    }
    let mut diagnostics = Vec::new();
    for sub in &mut plan.subtasks {
        sub.tools.retain(|name| {
            let known = tools.contains(name);
            if !known {
                diagnostics.push(format!("plan references unknown tool `{name}`; dropped"));
            }
            known
        });
    }
    Ok((plan, diagnostics))
}

fn tool_text(tools: &ToolSet, config: &SolverConfig) -> String {
    let text = describe_for_prompt(tools, config.tool_budget);
    if text.is_empty() {
        "(no tools available)".into()
    } else {
        text
    }
}

pub fn plan(
    task: &str,
    tools: &ToolSet,
    gateway: &Gateway,
    config: &SolverConfig,
    transcript: &mut Transcript,
) -> Result<Plan, SolverError> {
    let slots = Slots::from([
        ("task".to_string(), task.to_string()),
        ("tools".to_string(), tool_text(tools, config)),
    ]);
    let reply = gateway.ask(PromptId::Plan, &slots, transcript)?;
    let (plan, diagnostics) = parse_plan(&reply, tools)?;
    for d in diagnostics {
        transcript.diagnostic("plan", d);
    }
    Ok(plan)
}

/// Extracts and lints solver code from a reply.
pub fn accept_code(reply: &str, tools: &ToolSet) -> Result<String, SolverError> {
    let code = extract_code(reply)?;
    lint_solver(&code, tools)?;
    Ok(code)
}

pub fn generate_code(
    task: &str,
    tools: &ToolSet,
    plan: &Plan,
    template: &CodeTemplate,
    gateway: &Gateway,
    config: &SolverConfig,
    transcript: &mut Transcript,
) -> Result<String, SolverError> {
    let slots = Slots::from([
        ("task".to_string(), task.to_string()),
        ("tools".to_string(), tool_text(tools, config)),
        ("plan".to_string(), plan.render()),
        ("template".to_string(), template.text().to_string()),
    ]);
    let reply = gateway.ask(PromptId::Gen, &slots, transcript)?;
    accept_code(&reply, tools)
}

#[allow(clippy::too_many_arguments)]
pub fn debug_code(
    task: &str,
    tools: &ToolSet,
    code: &str,
    error: &str,
    template: &CodeTemplate,
    gateway: &Gateway,
    config: &SolverConfig,
    transcript: &mut Transcript,
) -> Result<String, SolverError> {
    let slots = Slots::from([
        ("task".to_string(), task.to_string()),
        ("tools".to_string(), tool_text(tools, config)),
        ("code".to_string(), code.to_string()),
        (
            "error".to_string(),
            crate::executor::truncate_diagnostics(error, crate::executor::ERROR_CAP),
        ),
        ("template".to_string(), template.text().to_string()),
    ]);
    let reply = gateway.ask(PromptId::Dbg, &slots, transcript)?;
    accept_code(&reply, tools)
}

/// Outcome of validating a cleanly executed candidate.
#[derive(Debug, Clone)]
pub struct Validation {
    /// `None` when no score could be produced.
    pub score: Option<f64>,
    /// Solver code after validation (the referee may revise it).
    pub code: String,
    pub result: ExecutionResult,
    pub detail: Option<String>,
}

/// Supplies and runs the evaluator for clean candidates.
pub trait Validator {
    fn validate(
        &mut self,
        spec: &ProblemSpec,
        code: &str,
        result: &ExecutionResult,
        transcript: &mut Transcript,
    ) -> Validation;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Iterations {
    /// Debug rounds used in the returned cycle.
    pub debug: usize,
    pub cycles: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub code: String,
    pub result: ExecutionResult,
    pub score: Option<f64>,
    pub iterations_used: Iterations,
}

fn accepted(tau: TaskType, score: Option<f64>) -> bool {
    match (tau, score) {
        (TaskType::Assist, Some(s)) => s == 1.0,
        (TaskType::Opt, Some(s)) => s.is_finite(),
        (_, None) => false,
    }
}

fn better(candidate: &SolveOutcome, incumbent: &Option<SolveOutcome>) -> bool {
    match incumbent {
        None => true,
        Some(inc) => candidate.score.unwrap_or(f64::NEG_INFINITY) > inc.score.unwrap_or(f64::NEG_INFINITY),
    }
}

/// Everything [`solve_loop`] needs besides the spec and the validator.
pub struct SolveContext<'a> {
    pub gateway: &'a Gateway,
    pub executor: &'a Executor,
    pub template: &'a CodeTemplate,
    pub kwargs: &'a Map<String, Value>,
    pub config: SolverConfig,
}

/// plan → generate → (execute → debug)* → validate, re-planning on failure.
pub fn solve_loop(
    spec: &ProblemSpec,
    validator: &mut dyn Validator,
    ctx: &SolveContext<'_>,
    transcript: &mut Transcript,
) -> Result<SolveOutcome, SolverError> {
    let tools = &spec.tools_solve;
    let cfg = &ctx.config;
    let mut best: Option<SolveOutcome> = None;
    for cycle in 1..=cfg.max_cycles {
        transcript.stage("solve_cycle", json!({ "cycle": cycle }));
        let plan = match plan(&spec.t, tools, ctx.gateway, cfg, transcript) {
            Ok(p) => p,
            Err(e @ SolverError::Llm(_)) => return Err(e),
            Err(e) => {
                transcript.diagnostic("plan", e.to_string());
                continue;
            }
        };
        let mut code = match generate_code(&spec.t, tools, &plan, ctx.template, ctx.gateway, cfg, transcript) {
            Ok(c) => c,
            Err(e @ SolverError::Llm(_)) => return Err(e),
            Err(e) => {
                transcript.diagnostic("generate", e.to_string());
                continue;
            }
        };
        let mut debugs = 0;
        let mut pending: Option<String> = None;
        let clean = loop {
            if pending.is_none() {
                let label = format!("solve-c{cycle}-d{debugs}");
                let result = ctx.executor.run_solver(&label, &code, tools, ctx.kwargs)?;
                transcript.execution(&label, &result);
                if result.is_ok() {
                    break Some(result);
                }
                pending = Some(result.diagnostics());
            }
            if debugs == cfg.max_debug {
                break None;
            }
            debugs += 1;
            let error = pending.take().unwrap_or_default();
            match debug_code(&spec.t, tools, &code, &error, ctx.template, ctx.gateway, cfg, transcript) {
                Ok(c) => code = c,
                Err(e @ SolverError::Llm(_)) => return Err(e),
                Err(e) => {
                    transcript.diagnostic("debug", e.to_string());
                    pending = Some(e.to_string());
                }
            }
        };
        let Some(result) = clean else {
            transcript.diagnostic("solve", format!("cycle {cycle} exhausted {} debug rounds", cfg.max_debug));
            continue;
        };
        let v = validator.validate(spec, &code, &result, transcript);
        let outcome = SolveOutcome {
            code: v.code,
            result: v.result,
            score: v.score,
            iterations_used: Iterations { debug: debugs, cycles: cycle },
        };
        transcript.evaluation(&format!("validate-c{cycle}"), outcome.score, v.detail);
        if accepted(spec.tau, outcome.score) {
            return Ok(outcome);
        }
        if better(&outcome, &best) {
            best = Some(outcome);
        }
    }
    Err(SolverError::SolveExhausted(best.map(Box::new)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::tests::toolset;

    #[test]
    fn plan_parsing() {
        let tools = toolset(&["A", "B"]);
        let reply = "```json\n{\"subtasks\": [{\"description\": \"load\", \"tools\": [\"A\"]}, {\"description\": \"fit\", \"tools\": [\"B\", \"Zap\"], \"packages\": [\"numpy\"]}, {\"description\": \"save\"}], \"rationale\": \"r\"}\n```";
        let (plan, diags) = parse_plan(reply, &tools).unwrap();
        assert_eq!(plan.subtasks.len(), 3);
        assert_eq!(plan.subtasks[1].tools, vec!["B".to_string()]);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("Zap"));
        assert!(plan.render().starts_with("1. load [tools: A]"));

        let bare = "```json\n[{\"description\": \"only\"}]\n```";
        assert_eq!(parse_plan(bare, &tools).unwrap().0.subtasks.len(), 1);
        assert!(matches!(parse_plan("just prose", &tools), Err(SolverError::PlanParseError(_))));
        assert!(matches!(
            parse_plan("```json\n{\"subtasks\": []}\n```", &tools),
            Err(SolverError::PlanParseError(_))
        ));
    }

    #[test]
    fn code_acceptance() {
        let tools = toolset(&["SpectraToSmiles"]);
        let reply = format!("Here it is.\n```python\n{}```\n", crate::template::tests::SAMPLE);
        assert!(accept_code(&reply, &tools).is_ok());
        let missing = reply.replace("def solve(", "def main(");
        assert!(matches!(accept_code(&missing, &tools), Err(SolverError::TemplateViolation(_))));
        assert!(matches!(
            accept_code("no fence at all", &tools),
            Err(SolverError::CodeExtractError(_))
        ));
    }

    #[test]
    fn acceptance_rule() {
        assert!(accepted(TaskType::Assist, Some(1.0)));
        assert!(!accepted(TaskType::Assist, Some(0.0)));
        assert!(accepted(TaskType::Opt, Some(0.2)));
        assert!(!accepted(TaskType::Opt, None));
    }
}
