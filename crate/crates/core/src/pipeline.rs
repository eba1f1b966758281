//! End-to-end runs: analyze → solve → verify → evolve (opt only) → package.
//!
//! Every run owns a directory holding its transcript, final artifacts and a
//! `run.json` summary. The transcript is written on every exit path.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::analyzer::{analyze, AnalyzeOptions, AnalyzerError, TaskType};
use crate::config::CliConfig;
use crate::evalgen::{stash_reference, EvaluatorGate, VerifyContext};
use crate::evolution::{evolve, evolves, EvolutionConfig, EvolutionError, EvolutionOutcome, ExecFitness, Individual, VaryContext};
use crate::executor::{ExecError, Executor, RunConfig};
use crate::llm::Gateway;
use crate::packager::{assemble_project, verify_package, PackagerError, ProjectManifest, Provenance};
use crate::par::Parallelism;
use crate::registry::{Registry, ToolKind, ToolSet};
use crate::retrieval::{EmbedSource, Embedder, RetrievalError, VectorIndex};
use crate::solver::{solve_loop, Iterations, SolveContext, SolverConfig, SolverError};
use crate::template::{tool_references, CodeTemplate, TemplateError};
use crate::transcript::{write_jsonl, Transcript};
use crate::ENGINE_VERSION;

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const EVOLUTION_FILE: &str = "evolution.jsonl";
pub const SUMMARY_FILE: &str = "run.json";
pub const RUN_SOLVER_FILE: &str = "solver.py";
pub const RUN_EVALUATOR_FILE: &str = "evaluator.py";
pub const PROJECT_DIR: &str = "project";
const WORK_DIR: &str = "work";
const PRIVATE_DIR: &str = "private";
const RUN_PLACEHOLDER: &str = "<run>";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("analysis failed: {0}")]
    Analyzer(#[from] AnalyzerError),
    #[error("solving failed: {0}")]
    Solver(#[from] SolverError),
    #[error("no verified evaluator was produced")]
    Unverified,
    #[error("evolution failed: {0}")]
    Evolution(#[from] EvolutionError),
    #[error("packaging failed: {0}")]
    Packager(#[from] PackagerError),
    #[error("execution setup failed: {0}")]
    Exec(#[from] ExecError),
    #[error("retrieval index failed: {0}")]
    Retrieval(#[from] RetrievalError),
    #[error("invalid code template: {0}")]
    Template(#[from] TemplateError),
    #[error("run `{0}` has no solver artifact")]
    MissingArtifact(PathBuf),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct EngineSettings {
    pub k: usize,
    pub solver: SolverConfig,
    pub max_referee: usize,
    pub evolution: EvolutionConfig,
    pub timeout: Duration,
    pub max_parallel: usize,
    pub package: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            k: 15,
            solver: SolverConfig::default(),
            max_referee: 3,
            evolution: EvolutionConfig::default(),
            timeout: Duration::from_secs(600),
            max_parallel: 4,
            package: true,
        }
    }
}

impl EngineSettings {
    pub fn from_config(cfg: &CliConfig) -> Self {
        let defaults = Self::default();
        Self {
            k: cfg.k,
            solver: SolverConfig {
                max_debug: cfg.max_debug,
                max_cycles: cfg.max_cycles,
                ..defaults.solver
            },
            max_referee: cfg.max_referee,
            evolution: EvolutionConfig {
                generations: cfg.generations,
                capacity: cfg.capacity,
                seed: cfg.seed,
                ..defaults.evolution
            },
            timeout: Duration::from_secs(cfg.timeout),
            max_parallel: cfg.parallelism,
            package: true,
        }
    }
}

/// Which agent a run failed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Setup,
    Analyze,
    Solve,
    Evolve,
    Package,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task_id: String,
    pub status: RunStatus,
    pub task_type: Option<TaskType>,
    pub score: Option<f64>,
    pub final_fitness: Option<f64>,
    pub best_generation: Option<usize>,
    pub iterations: Option<Iterations>,
    pub tools_solve: Vec<String>,
    pub tools_used: Vec<String>,
    pub package_verified: Option<bool>,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub engine_version: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub solver: Option<String>,
    pub evaluator: Option<String>,
    pub result_payload: Option<Value>,
    pub evolution: Option<EvolutionOutcome>,
    pub project: Option<ProjectManifest>,
    pub run_dir: PathBuf,
}

impl RunOutcome {
    pub fn is_ok(&self) -> bool {
        self.summary.status == RunStatus::Ok
    }
}

pub struct SolveRequest<'a> {
    pub task_id: &'a str,
    pub question: &'a str,
    pub forced_type: Option<TaskType>,
    /// Directory that file references in the question resolve against.
    pub base_dir: &'a Path,
    pub kwargs: Map<String, Value>,
}

/// Shared, immutable engine state; cheap to clone with another gateway.
#[derive(Clone)]
pub struct Engine {
    registry: Arc<Registry>,
    index: Arc<VectorIndex>,
    embedder: Arc<dyn Embedder>,
    gateway: Gateway,
    template: CodeTemplate,
    settings: EngineSettings,
}

impl Engine {
    pub fn new(
        registry: Registry,
        embedder: Arc<dyn Embedder>,
        gateway: Gateway,
        settings: EngineSettings,
    ) -> Result<Self, PipelineError> {
        let index = VectorIndex::build(&registry, embedder.as_ref(), EmbedSource::Description, Parallelism::default())?;
        let template = CodeTemplate::new(gateway.prompts().code_template())?;
        Ok(Self {
            registry: Arc::new(registry),
            index: Arc::new(index),
            embedder,
            gateway,
            template,
            settings,
        })
    }

    pub fn with_gateway(&self, gateway: Gateway) -> Self {
        Self {
            gateway,
            ..self.clone()
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    /// Every registry tool as one solve-kind set.
    pub fn all_tools(&self) -> ToolSet {
        ToolSet::from_handles(ToolKind::Solve, self.registry.iter().cloned()).expect("registry names are unique")
    }

    pub fn executor(&self, workdir_root: &Path) -> Result<Executor, ExecError> {
        let mut rc = RunConfig::new(workdir_root);
        rc.timeout = self.settings.timeout;
        rc.max_parallel = self.settings.max_parallel;
        Executor::new(rc)
    }

    /// Runs the whole pipeline into `run_dir`. Stage failures are reported in
    /// the outcome; only artifact I/O errors are returned as `Err`.
    pub fn solve(&self, req: &SolveRequest<'_>, run_dir: &Path) -> Result<RunOutcome, PipelineError> {
        fs::create_dir_all(run_dir)?;
        let run_dir = run_dir.canonicalize()?;
        let mut tr = Transcript::new();
        tr.scrub_prefix(run_dir.display().to_string(), RUN_PLACEHOLDER);
        let mut out = RunOutcome {
            summary: RunSummary {
                task_id: req.task_id.to_string(),
                status: RunStatus::Failed,
                task_type: None,
                score: None,
                final_fitness: None,
                best_generation: None,
                iterations: None,
                tools_solve: Vec::new(),
                tools_used: Vec::new(),
                package_verified: None,
                failed_stage: None,
                error: None,
                engine_version: ENGINE_VERSION.to_string(),
            },
            solver: None,
            evaluator: None,
            result_payload: None,
            evolution: None,
            project: None,
            run_dir: run_dir.clone(),
        };
        if let Err((stage, e)) = self.run_stages(req, &run_dir, &mut out, &mut tr) {
            tr.diagnostic("pipeline", e.to_string());
            out.summary.failed_stage = Some(stage);
            out.summary.error = Some(e.to_string());
        } else {
            out.summary.status = RunStatus::Ok;
        }
        self.write_artifacts(&out, &tr, &run_dir)?;
        Ok(out)
    }

    fn run_stages(
        &self,
        req: &SolveRequest<'_>,
        run_dir: &Path,
        out: &mut RunOutcome,
        tr: &mut Transcript,
    ) -> Result<(), (Stage, PipelineError)> {
        let executor = self.executor(&run_dir.join(WORK_DIR)).map_err(|e| (Stage::Setup, e.into()))?;

        let opts = AnalyzeOptions {
            k: self.settings.k,
            forced_type: req.forced_type,
            base_dir: req.base_dir,
        };
        let spec = analyze(req.question, &self.registry, &self.index, self.embedder.as_ref(), &self.gateway, &opts, tr)
            .map_err(|e| (Stage::Analyze, e.into()))?;
        out.summary.task_type = Some(spec.tau);
        out.summary.tools_solve = spec.tools_solve.names();

        let private = run_dir.join(PRIVATE_DIR);
        let reference_path = stash_reference(&spec.a_ref, &private).map_err(|e| (Stage::Setup, e.into()))?;
        let descriptor = spec.a_ref.descriptor(&reference_path);
        let mut gate = EvaluatorGate::new(
            VerifyContext {
                spec: &spec,
                reference_path: &reference_path,
                executor: &executor,
                gateway: &self.gateway,
                kwargs: &req.kwargs,
                max_referee: self.settings.max_referee,
            },
            descriptor,
        );
        let ctx = SolveContext {
            gateway: &self.gateway,
            executor: &executor,
            template: &self.template,
            kwargs: &req.kwargs,
            config: self.settings.solver,
        };
        let solved = solve_loop(&spec, &mut gate, &ctx, tr).map_err(|e| (Stage::Solve, e.into()))?;
        let evaluator = gate.evaluator.take().ok_or((Stage::Solve, PipelineError::Unverified))?;
        out.summary.iterations = Some(solved.iterations_used);
        out.summary.score = solved.score;
        out.solver = Some(solved.code.clone());
        out.evaluator = Some(evaluator.code.clone());
        out.result_payload = solved.result.result_payload.clone();

        let mut final_code = solved.code.clone();
        out.summary.final_fitness = solved.score;
        if evolves(spec.tau) {
            let fitness = ExecFitness {
                executor: &executor,
                evaluator_code: &evaluator.code,
                tools_solve: &spec.tools_solve,
                tools_eval: &spec.tools_eval,
                reference_path: &reference_path,
                kwargs: &req.kwargs,
                binary: false,
            };
            let vary = VaryContext {
                task: &spec.t,
                tools_solve: &spec.tools_solve,
                template: &self.template,
                gateway: &self.gateway,
                tool_budget: self.settings.solver.tool_budget,
            };
            let evo = evolve(Individual::seed(solved.code.clone(), solved.score), &fitness, &self.settings.evolution, &vary, tr)
                .map_err(|e| (Stage::Evolve, e.into()))?;
            final_code = evo.best.code.clone();
            out.summary.final_fitness = evo.best.fitness;
            out.summary.best_generation = Some(evo.best.generation_born);
            out.solver = Some(final_code.clone());
            out.evolution = Some(evo);
        }
        out.summary.tools_used = tool_references(&final_code).into_iter().collect();

        if self.settings.package {
            let mut referenced = tool_references(&final_code);
            referenced.extend(tool_references(&evaluator.code));
            let tools = ToolSet::from_handles(
                ToolKind::Solve,
                spec.tools_eval.iter().filter(|h| referenced.contains(h.name())).cloned(),
            )
            .expect("subset of a tool set");
            let provenance = Provenance {
                task_id: req.task_id.to_string(),
                fitness: out.summary.final_fitness,
                generation: out.summary.best_generation,
                engine_version: ENGINE_VERSION.to_string(),
            };
            let manifest = assemble_project(&final_code, Some(&evaluator.code), &tools, provenance, &run_dir.join(PROJECT_DIR))
                .map_err(|e| (Stage::Package, e.into()))?;
            let check = verify_package(&manifest, &executor, &req.kwargs).map_err(|e| (Stage::Package, e.into()))?;
            for d in &check.diagnostics {
                tr.diagnostic("package", d.clone());
            }
            tr.stage("package", serde_json::json!({"verified": check.ok}));
            out.summary.package_verified = Some(check.ok);
            out.project = Some(manifest);
        }
        Ok(())
    }

    fn write_artifacts(&self, out: &RunOutcome, tr: &Transcript, run_dir: &Path) -> Result<(), PipelineError> {
        tr.write_to(&run_dir.join(TRANSCRIPT_FILE))?;
        if let Some(code) = &out.solver {
            fs::write(run_dir.join(RUN_SOLVER_FILE), code)?;
        }
        if let Some(code) = &out.evaluator {
            fs::write(run_dir.join(RUN_EVALUATOR_FILE), code)?;
        }
        if let Some(evo) = &out.evolution {
            write_jsonl(&run_dir.join(EVOLUTION_FILE), &evo.history)?;
        }
        let summary = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
        fs::write(run_dir.join(SUMMARY_FILE), summary + "\n")?;
        Ok(())
    }
}

/// Packages a finished run's artifacts into `out_dir`.
pub fn pack_run(run_dir: &Path, registry: &Registry, out_dir: &Path) -> Result<ProjectManifest, PipelineError> {
    let solver_path = run_dir.join(RUN_SOLVER_FILE);
    let solver = fs::read_to_string(&solver_path).map_err(|_| PipelineError::MissingArtifact(run_dir.to_path_buf()))?;
    let evaluator = fs::read_to_string(run_dir.join(RUN_EVALUATOR_FILE)).ok();
    let summary: Option<RunSummary> = fs::read_to_string(run_dir.join(SUMMARY_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let mut referenced = tool_references(&solver);
    if let Some(e) = &evaluator {
        referenced.extend(tool_references(e));
    }
    let mut tools = ToolSet::new(ToolKind::Solve);
    for name in &referenced {
        let handle = registry.get(name).ok_or_else(|| PackagerError::UnknownTool(name.clone()))?;
        tools.insert(handle.clone()).expect("names are unique");
    }
    let provenance = Provenance {
        task_id: summary.as_ref().map(|s| s.task_id.clone()).unwrap_or_default(),
        fitness: summary.as_ref().and_then(|s| s.final_fitness),
        generation: summary.as_ref().and_then(|s| s.best_generation),
        engine_version: ENGINE_VERSION.to_string(),
    };
    Ok(assemble_project(&solver, evaluator.as_deref(), &tools, provenance, out_dir)?)
}
