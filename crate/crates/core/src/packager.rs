//! Turns a final solver into a self-contained project directory:
//!
//! ```text
//! <out>/solver.py            the solver
//! <out>/evaluator.py         the verified evaluator, when there is one
//! <out>/tools/<name>/...     copies of every referenced tool
//! <out>/tools.json           tool name -> relative root and entry
//! <out>/tools_shim.py        tool loader used by the driver
//! <out>/run_solver.py        driver calling solve(tools, **kwargs)
//! <out>/args.json            default kwargs for the driver
//! <out>/environment.txt      sorted union of tool dependencies
//! <out>/project_manifest.json
//! <out>/run.sh               launcher
//! <out>/README.md
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::executor::{
    copy_dir_all, ExecError, Executor, Job, DRIVER_FILE, EVALUATOR_FILE, SHIM_FILE, SOLVER_DRIVER, SOLVER_FILE,
    TOOLS_MANIFEST, TOOLS_SHIM,
};
use crate::registry::{Registry, ToolSet};
use crate::template::tool_references;

pub const MANIFEST_FILE: &str = "project_manifest.json";
pub const ENVIRONMENT_FILE: &str = "environment.txt";
pub const LAUNCHER_FILE: &str = "run.sh";

#[derive(Debug, Error)]
pub enum PackagerError {
    #[error("solver references unknown tool `{0}`")]
    UnknownTool(String),
    #[error("copy failed for {path}: {reason}")]
    CopyFailure { path: PathBuf, reason: String },
    #[error("conflicting dependency pins: {}", .0.join("; "))]
    DependencyConflict(Vec<String>),
    #[error("output directory {0} exists and is not a previous package")]
    OutputNotEmpty(PathBuf),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
}

fn copy_failure(path: &Path) -> impl Fn(std::io::Error) -> PackagerError + '_ {
    move |e| PackagerError::CopyFailure {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Where a packaged solver came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub task_id: String,
    pub fitness: Option<f64>,
    pub generation: Option<usize>,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectManifest {
    pub solver_entry: String,
    pub evaluator: Option<String>,
    pub launcher: String,
    pub tools: Vec<String>,
    pub dependencies: Vec<String>,
    pub environment_files: Vec<String>,
    pub provenance: Provenance,
    /// Package root; not serialized, set when loading or assembling.
    #[serde(skip)]
    pub root: PathBuf,
}

impl ProjectManifest {
    pub fn load(root: &Path) -> Result<Self, PackagerError> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(copy_failure(&path))?;
        let mut m: ProjectManifest =
            serde_json::from_str(&text).map_err(|e| PackagerError::InvalidManifest(e.to_string()))?;
        m.root = root.to_path_buf();
        Ok(m)
    }
}

/// Names of all tools the solver calls; each must be registered.
pub fn analyze_dependencies(solver_code: &str, registry: &Registry) -> Result<BTreeSet<String>, PackagerError> {
    let names = tool_references(solver_code);
    for name in &names {
        if registry.get(name).is_none() {
            return Err(PackagerError::UnknownTool(name.clone()));
        }
    }
    Ok(names)
}

fn package_name(dep: &str) -> String {
    let end = dep
        .find(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_' || c == '.'))
        .unwrap_or(dep.len());
    dep[..end].to_ascii_lowercase().replace('_', "-")
}

fn exact_pin(dep: &str) -> Option<&str> {
    let i = dep.find("==")?;
    Some(dep[i + 2..].split([',', ';', ' ']).next().unwrap_or("").trim())
}

/// Sorted union of dependency strings; `==` pins of one package to different
/// versions are a conflict.
pub fn merge_dependencies<'a>(deps: impl IntoIterator<Item = &'a str>) -> Result<Vec<String>, PackagerError> {
    let set: BTreeSet<String> = deps
        .into_iter()
        .map(|d| d.split_whitespace().collect::<String>())
        .filter(|d| !d.is_empty())
        .collect();
    let mut pins: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for dep in &set {
        if let Some(v) = exact_pin(dep) {
            pins.entry(package_name(dep)).or_default().insert(v.to_string());
        }
    }
    let conflicts: Vec<String> = pins
        .into_iter()
        .filter(|(_, versions)| versions.len() > 1)
        .map(|(name, versions)| {
            format!("{name} pinned to {}", versions.into_iter().collect::<Vec<_>>().join(" and "))
        })
        .collect();
    if conflicts.is_empty() {
        Ok(set.into_iter().collect())
    } else {
        Err(PackagerError::DependencyConflict(conflicts))
    }
}

fn safe_dir_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn launcher_script() -> String {
    format!("#!/bin/sh\nset -e\ncd \"$(dirname \"$0\")\"\nexec python3 {DRIVER_FILE} \"$@\"\n")
}

fn readme(manifest: &ProjectManifest) -> String {
    let tools = if manifest.tools.is_empty() {
        "none".to_string()
    } else {
        manifest.tools.join(", ")
    };
    format!(
        "# {task}\n\nStandalone solver package.\n\nRun `./{LAUNCHER_FILE}`; keyword arguments for `solve()` are read from \
         `args.json` under `kwargs`, and the result is written to `result.json`.\n\nTools: {tools}\n\n\
         Dependencies are listed in `{ENVIRONMENT_FILE}`.\n",
        task = if manifest.provenance.task_id.is_empty() { "solver" } else { &manifest.provenance.task_id },
    )
}

/// Builds the project in `out_dir`. An existing previous package there is
/// replaced; any other non-empty directory is refused.
pub fn assemble_project(
    solver_code: &str,
    evaluator_code: Option<&str>,
    tools: &ToolSet,
    provenance: Provenance,
    out_dir: &Path,
) -> Result<ProjectManifest, PackagerError> {
    let referenced = tool_references(solver_code);
    for name in &referenced {
        if !tools.contains(name) {
            return Err(PackagerError::UnknownTool(name.clone()));
        }
    }
    let included: Vec<_> = tools.iter().filter(|h| referenced.contains(h.name())).collect();
    let dependencies = merge_dependencies(
        included.iter().flat_map(|h| h.spec.dependencies.iter().map(String::as_str)),
    )?;

    if out_dir.exists() {
        let non_empty = fs::read_dir(out_dir).map_err(copy_failure(out_dir))?.next().is_some();
        if non_empty {
            if !out_dir.join(MANIFEST_FILE).is_file() {
                return Err(PackagerError::OutputNotEmpty(out_dir.to_path_buf()));
            }
            fs::remove_dir_all(out_dir).map_err(copy_failure(out_dir))?;
        }
    }
    fs::create_dir_all(out_dir).map_err(copy_failure(out_dir))?;
    let write = |name: &str, content: &str| -> Result<(), PackagerError> {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(copy_failure(&path))
    };

    let mut tools_json = Map::new();
    for handle in &included {
        let rel = format!("tools/{}", safe_dir_name(handle.name()));
        let dest = out_dir.join(&rel);
        copy_dir_all(&handle.root_dir, &dest).map_err(copy_failure(&handle.root_dir))?;
        tools_json.insert(handle.name().to_string(), json!({"root": rel, "entry": handle.entry()}));
    }

    write(SOLVER_FILE, solver_code)?;
    if let Some(code) = evaluator_code {
        write(EVALUATOR_FILE, code)?;
    }
    write(SHIM_FILE, TOOLS_SHIM)?;
    write(DRIVER_FILE, SOLVER_DRIVER)?;
    write(TOOLS_MANIFEST, &serde_json::to_string_pretty(&Value::Object(tools_json)).expect("json"))?;
    write(
        crate::executor::ARGS_FILE,
        &serde_json::to_string_pretty(&json!({"kwargs": {}, "tools_manifest": TOOLS_MANIFEST})).expect("json"),
    )?;
    let mut env_text = dependencies.join("\n");
    if !env_text.is_empty() {
        env_text.push('\n');
    }
    write(ENVIRONMENT_FILE, &env_text)?;
    write(LAUNCHER_FILE, &launcher_script())?;
    let launcher = out_dir.join(LAUNCHER_FILE);
    fs::set_permissions(&launcher, fs::Permissions::from_mode(0o755)).map_err(copy_failure(&launcher))?;

    let manifest = ProjectManifest {
        solver_entry: SOLVER_FILE.into(),
        evaluator: evaluator_code.map(|_| EVALUATOR_FILE.to_string()),
        launcher: LAUNCHER_FILE.into(),
        tools: included.iter().map(|h| h.name().to_string()).collect(),
        dependencies,
        environment_files: vec![ENVIRONMENT_FILE.into()],
        provenance,
        root: out_dir.to_path_buf(),
    };
    write("README.md", &readme(&manifest))?;
    write(MANIFEST_FILE, &(serde_json::to_string_pretty(&manifest).expect("json") + "\n"))?;
    Ok(manifest)
}

/// Result of a package smoke run.
#[derive(Debug, Clone, PartialEq)]
pub struct PackageCheck {
    pub ok: bool,
    pub diagnostics: Vec<String>,
}

/// Runs the packaged solver from a fresh copy of the package; true iff it
/// executes cleanly and every tool it calls is part of the package.
pub fn verify_package(
    manifest: &ProjectManifest,
    executor: &Executor,
    kwargs: &Map<String, Value>,
) -> Result<PackageCheck, ExecError> {
    let root = &manifest.root;
    let mut diagnostics = Vec::new();
    let solver = match fs::read_to_string(root.join(&manifest.solver_entry)) {
        Ok(s) => s,
        Err(e) => {
            return Ok(PackageCheck {
                ok: false,
                diagnostics: vec![format!("cannot read solver: {e}")],
            })
        }
    };
    let listed: BTreeSet<&str> = manifest.tools.iter().map(String::as_str).collect();
    for name in tool_references(&solver) {
        if !listed.contains(name.as_str()) {
            diagnostics.push(format!("solver calls `{name}` which is not packaged"));
        }
    }
    let tools_json: Value = fs::read_to_string(root.join(TOOLS_MANIFEST))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or(Value::Null);
    for name in &manifest.tools {
        let entry = tools_json
            .get(name)
            .and_then(|t| Some(root.join(t.get("root")?.as_str()?).join(t.get("entry")?.as_str()?)));
        match entry {
            Some(p) if p.is_file() => {}
            _ => diagnostics.push(format!("entry of tool `{name}` is missing")),
        }
    }
    if !diagnostics.is_empty() {
        return Ok(PackageCheck { ok: false, diagnostics });
    }
    let job = Job {
        label: "verify-package".into(),
        script_name: DRIVER_FILE.into(),
        files: Vec::new(),
        args: json!({"kwargs": kwargs, "tools_manifest": TOOLS_MANIFEST}),
        copy_from: Some(root.clone()),
    };
    let result = executor.run_job(&job)?;
    if !result.is_ok() {
        diagnostics.push(result.diagnostics());
    }
    Ok(PackageCheck {
        ok: result.is_ok(),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dependency_merge() {
        assert_eq!(merge_dependencies(["x>=1", "x>=1", "numpy"]).unwrap(), vec!["numpy", "x>=1"]);
        assert!(matches!(merge_dependencies(["x==1", "X==2"]), Err(PackagerError::DependencyConflict(_))));
        assert_eq!(merge_dependencies(["x==1", "x==1", "x>=0.5"]).unwrap(), vec!["x==1", "x>=0.5"]);
        assert!(merge_dependencies(Vec::<&str>::new()).unwrap().is_empty());
    }

    #[test]
    fn package_names() {
        assert_eq!(package_name("Foo_Bar>=2"), "foo-bar");
        assert_eq!(exact_pin("torch==2.1.0; python_version>'3'"), Some("2.1.0"));
        assert_eq!(exact_pin("x>=1"), None);
    }
}
