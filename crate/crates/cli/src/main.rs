//! `verisolve` command line: solve, bench, tools, pack.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use verisolve::benchmark::{
    build_report, load_records, load_suite, render_table, run_bench, write_outputs, BenchConfig, TaskSpec,
    ENGINE_METHOD, REFERENCE_METHOD,
};
use verisolve::config::{CliConfig, ConfigError, ConfigLayer, CONFIG_FILE};
use verisolve::llm::{Backend, Gateway, GatewaySettings, HttpBackend, HttpConfig, LlmError, PromptLibrary, ScriptedBackend};
use verisolve::par::Parallelism;
use verisolve::pipeline::{pack_run, Engine, EngineSettings, SolveRequest};
use verisolve::registry::load_registry;
use verisolve::retrieval::HashingEmbedder;
use verisolve::TaskType;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "verisolve", version, about = "Turn computational task descriptions into verified, evolved solver code")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Config file (defaults to ./verisolve.toml when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    tools_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    prompts_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    runs_dir: Option<PathBuf>,
    /// OpenAI-compatible endpoint.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    /// Number of retrieved tools.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Evolution generations.
    #[arg(long, global = true)]
    generations: Option<usize>,
    /// Population capacity.
    #[arg(long, global = true)]
    capacity: Option<usize>,
    #[arg(long, global = true)]
    max_debug: Option<usize>,
    #[arg(long, global = true)]
    max_cycles: Option<usize>,
    #[arg(long, global = true)]
    max_referee: Option<usize>,
    /// Per-execution timeout in seconds.
    #[arg(long, global = true)]
    timeout: Option<u64>,
    /// Concurrent executions (and bench trials).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scripted transcript: a JSON file for `solve`, a directory of
    /// `<task_id>.<method>.json` (or `<task_id>.json`) files for `bench`.
    #[arg(long, global = true)]
    scripted: Option<PathBuf>,
}

impl GlobalArgs {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            tools_dir: self.tools_dir.clone(),
            prompts_dir: self.prompts_dir.clone(),
            runs_dir: self.runs_dir.clone(),
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key: None,
            k: self.k,
            generations: self.generations,
            capacity: self.capacity,
            max_debug: self.max_debug,
            max_cycles: self.max_cycles,
            max_referee: self.max_referee,
            timeout: self.timeout,
            parallelism: self.parallelism,
            seed: self.seed,
            scripted: self.scripted.clone(),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze, solve, verify, evolve (optimization tasks) and package.
    Solve {
        /// Task text, or a file containing it.
        #[arg(long)]
        question: String,
        #[arg(long = "type", value_enum, default_value_t = TypeArg::Auto)]
        task_type: TypeArg,
        /// Run directory name under the runs dir.
        #[arg(long)]
        run_id: Option<String>,
        /// Solver keyword arguments as a JSON object.
        #[arg(long)]
        kwargs: Option<String>,
    },
    /// Run a task suite and write a metrics report.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Extra `records.jsonl` files of other methods to rank against.
        #[arg(long)]
        compare: Vec<PathBuf>,
    },
    /// Inspect the tool registry.
    Tools {
        #[command(subcommand)]
        action: ToolsAction,
    },
    /// Package a finished run as a standalone project.
    Pack {
        #[arg(long)]
        run: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum ToolsAction {
    List,
    Validate,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TypeArg {
    Auto,
    Assist,
    Opt,
}

impl TypeArg {
    fn forced(self) -> Option<TaskType> {
        match self {
            TypeArg::Auto => None,
            TypeArg::Assist => Some(TaskType::Assist),
            TypeArg::Opt => Some(TaskType::Opt),
        }
    }
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Task(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn task<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Task(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Usage: verisolve [OPTIONS] <solve|bench|tools|pack>");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Task(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let config_file = cli.global.config.clone().unwrap_or_else(|| PathBuf::from(CONFIG_FILE));
    if cli.global.config.is_some() && !config_file.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", config_file.display())));
    }
    let cfg = CliConfig::load(&cli.global.layer(), &config_file)?;
    match cli.command {
        Command::Tools { action } => tools(&cfg, action),
        Command::Pack { run, out } => pack(&cfg, &run, &out),
        Command::Solve {
            question,
            task_type,
            run_id,
            kwargs,
        } => solve(&cfg, &question, task_type.forced(), run_id, kwargs.as_deref()),
        Command::Bench {
            suite,
            trials,
            out,
            compare,
        } => bench(&cfg, &suite, trials, &out, &compare),
    }
}

fn tools(cfg: &CliConfig, action: ToolsAction) -> Result<u8, Failure> {
    let registry = load_registry(&cfg.tools_dir).map_err(|e| Failure::Usage(e.to_string()))?;
    match action {
        ToolsAction::List => {
            for h in registry.iter() {
                let kind = if h.spec.is_eval() { " [eval]" } else { "" };
                println!("{}{kind}\t{}", h.name(), h.spec.description);
            }
            Ok(EXIT_OK)
        }
        ToolsAction::Validate => {
            for d in registry.diagnostics() {
                eprintln!("{}: {}", d.path.display(), d.message);
            }
            println!("{} valid tools, {} problems", registry.len(), registry.diagnostics().len());
            Ok(if registry.diagnostics().is_empty() { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

fn gateway(cfg: &CliConfig, backend: Arc<dyn Backend>) -> Result<Gateway, Failure> {
    let prompts = PromptLibrary::load(&cfg.prompts_dir).map_err(|e| Failure::Usage(e.to_string()))?;
    let settings = GatewaySettings {
        model: cfg.model.clone(),
        seed: Some(cfg.seed),
        ..GatewaySettings::default()
    };
    Ok(Gateway::new(backend, prompts, settings))
}

fn http_backend(cfg: &CliConfig, endpoint: &str) -> Result<Arc<dyn Backend>, Failure> {
    let mut http = HttpConfig::new(endpoint);
    http.api_key = cfg.api_key.clone();
    Ok(Arc::new(HttpBackend::new(http).map_err(|e| Failure::Usage(e.to_string()))?))
}

fn engine(cfg: &CliConfig, gateway: Gateway, package: bool) -> Result<Engine, Failure> {
    let registry = load_registry(&cfg.tools_dir).map_err(|e| Failure::Usage(e.to_string()))?;
    for d in registry.diagnostics() {
        log::warn!("skipping tool {}: {}", d.path.display(), d.message);
    }
    let mut settings = EngineSettings::from_config(cfg);
    settings.package = package;
    settings.evolution.parallelism = parallelism(cfg);
    Engine::new(registry, Arc::new(HashingEmbedder::default()), gateway, settings).map_err(task)
}

fn parallelism(cfg: &CliConfig) -> Parallelism {
    if cfg.parallelism > 1 {
        Parallelism::Parallel
    } else {
        Parallelism::Sequential
    }
}

fn next_run_id(runs_dir: &Path) -> String {
    (1..)
        .map(|i| format!("run-{i:04}"))
        .find(|id| !runs_dir.join(id).exists())
        .expect("unbounded")
}

fn solve(
    cfg: &CliConfig,
    question: &str,
    forced: Option<TaskType>,
    run_id: Option<String>,
    kwargs: Option<&str>,
) -> Result<u8, Failure> {
    let backend: Arc<dyn Backend> = match (&cfg.scripted, &cfg.endpoint) {
        (Some(path), _) => Arc::new(ScriptedBackend::from_file(path).map_err(|e| Failure::Usage(e.to_string()))?),
        (None, Some(endpoint)) => http_backend(cfg, endpoint)?,
        (None, None) => return Err(ConfigError::NoBackend.into()),
    };
    let kwargs: Map<String, Value> = match kwargs {
        None => Map::new(),
        Some(text) => match serde_json::from_str(text) {
            Ok(Value::Object(m)) => m,
            _ => return Err(Failure::Usage("--kwargs must be a JSON object".into())),
        },
    };
    let (text, base_dir) = match Path::new(question) {
        p if p.is_file() => (
            fs::read_to_string(p).map_err(task)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        _ => (question.to_string(), PathBuf::from(".")),
    };
    let engine = engine(cfg, gateway(cfg, backend)?, true)?;
    let run_id = run_id.unwrap_or_else(|| next_run_id(&cfg.runs_dir));
    let run_dir = cfg.runs_dir.join(&run_id);
    let req = SolveRequest {
        task_id: &run_id,
        question: &text,
        forced_type: forced,
        base_dir: &base_dir,
        kwargs,
    };
    let outcome = engine.solve(&req, &run_dir).map_err(task)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"));
    Ok(if outcome.is_ok() { EXIT_OK } else { EXIT_FAILURE })
}

/// Script for one `(task, method)`: `<dir>/<task>.<method>.json`, else
/// `<dir>/<task>.json` for the engine; an empty script otherwise.
fn scripted_backend(dir: &Path, task: &TaskSpec, method: &str) -> Result<ScriptedBackend, LlmError> {
    let specific = dir.join(format!("{}.{method}.json", task.id));
    let shared = dir.join(format!("{}.json", task.id));
    if specific.is_file() {
        ScriptedBackend::from_file(&specific)
    } else if method == ENGINE_METHOD && shared.is_file() {
        ScriptedBackend::from_file(&shared)
    } else {
        Ok(ScriptedBackend::new(Vec::new()))
    }
}

fn bench(cfg: &CliConfig, suite: &Path, trials: usize, out: &Path, compare: &[PathBuf]) -> Result<u8, Failure> {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    if let Some(dir) = &cfg.scripted {
        if !dir.is_dir() {
            return Err(Failure::Usage(format!("bench --scripted expects a directory, got {}", dir.display())));
        }
    }
    let tasks = load_suite(suite).map_err(|e| Failure::Usage(e.to_string()))?;
    let base_backend: Arc<dyn Backend> = match (&cfg.scripted, &cfg.endpoint) {
        (Some(_), _) => Arc::new(ScriptedBackend::new(Vec::new())),
        (None, Some(endpoint)) => http_backend(cfg, endpoint)?,
        (None, None) => return Err(ConfigError::NoBackend.into()),
    };
    let shared = gateway(cfg, base_backend)?;
    let engine = engine(cfg, shared.clone(), false)?;
    let scripted = cfg.scripted.clone();
    let factory = move |task: &TaskSpec, method: &str| -> Result<Gateway, LlmError> {
        match &scripted {
            Some(dir) => {
                let backend = scripted_backend(dir, task, method)?;
                Ok(Gateway::new(Arc::new(backend), shared.prompts().clone(), shared.settings().clone()))
            }
            None => Ok(shared.clone()),
        }
    };
    let config = BenchConfig {
        trials,
        methods: vec![ENGINE_METHOD.to_string(), REFERENCE_METHOD.to_string()],
        parallelism: parallelism(cfg),
        threads: cfg.parallelism,
        work_dir: cfg.runs_dir.join("bench"),
    };
    let mut records = run_bench(&engine, &tasks, &config, &factory).map_err(task)?;
    for path in compare {
        records.extend(load_records(path).map_err(|e| Failure::Usage(e.to_string()))?);
    }
    let report = build_report(&records, trials, ENGINE_METHOD).map_err(task)?;
    write_outputs(&report, &records, out).map_err(task)?;
    print!("{}", render_table(&report));
    Ok(EXIT_OK)
}

fn pack(cfg: &CliConfig, run: &str, out: &Path) -> Result<u8, Failure> {
    let registry = load_registry(&cfg.tools_dir).map_err(|e| Failure::Usage(e.to_string()))?;
    let run_dir = cfg.runs_dir.join(run);
    if !run_dir.is_dir() {
        return Err(Failure::Usage(format!("run `{run}` not found under {}", cfg.runs_dir.display())));
    }
    let manifest = pack_run(&run_dir, &registry, out).map_err(task)?;
    println!("packaged {} tools into {}", manifest.tools.len(), out.display());
    Ok(EXIT_OK)
}
