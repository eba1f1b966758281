//! Tool manifests: loading, validation, name resolution and prompt rendering.
//!
//! Every tool lives in its own directory holding a `tool.json` manifest and
//! the executable entry point named by the manifest's `entry` field:
//!
//! ```text
//! <tools-dir>/<name>/tool.json
//! <tools-dir>/<name>/<entry>
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// File name of a tool manifest inside its directory.
pub const MANIFEST_FILE: &str = "tool.json";

/// Tag marking a tool as evaluation-related.
pub const EVAL_TAG: &str = "eval";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("tools directory `{0}` does not exist")]
    MissingDir(PathBuf),
    #[error("failed to parse manifest `{path}`: {reason}")]
    ManifestParseError { path: PathBuf, reason: String },
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("duplicate tool name `{0}` in tool set")]
    DuplicateTool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One input or output parameter, stored as its raw `"type - explanation"` text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoEntry {
    pub name: String,
    pub spec: String,
}

impl IoEntry {
    pub fn new(name: impl Into<String>, spec: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            spec: spec.into(),
        }
    }

    /// Splits the entry into its type and explanation parts.
    pub fn parts(&self) -> Option<(&str, &str)> {
        let (ty, explanation) = self.spec.split_once(" - ")?;
        let (ty, explanation) = (ty.trim(), explanation.trim());
        if ty.is_empty() || explanation.is_empty() {
            None
        } else {
            Some((ty, explanation))
        }
    }
}

/// Ordered `name -> "type - explanation"` object on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IoSpec(pub Vec<IoEntry>);

impl IoSpec {
    pub fn iter(&self) -> impl Iterator<Item = &IoEntry> {
        self.0.iter()
    }
}

impl Serialize for IoSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for entry in &self.0 {
            map.serialize_entry(&entry.name, &entry.spec)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for IoSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct IoVisitor;

        impl<'de> Visitor<'de> for IoVisitor {
            type Value = IoSpec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping parameter names to \"type - explanation\" strings")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<IoSpec, A::Error> {
                let mut entries = Vec::new();
                while let Some((name, spec)) = access.next_entry::<String, String>()? {
                    if entries.iter().any(|e: &IoEntry| e.name == name) {
                        return Err(de::Error::custom(format!("duplicate parameter `{name}`")));
                    }
                    entries.push(IoEntry { name, spec });
                }
                Ok(IoSpec(entries))
            }
        }

        deserializer.deserialize_map(IoVisitor)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolMetadata {
    #[serde(default)]
    pub limitations: String,
    #[serde(default)]
    pub related_papers: Vec<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// The standardized manifest of one callable tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub inputs: IoSpec,
    pub outputs: IoSpec,
    #[serde(default)]
    pub usage_examples: Vec<String>,
    #[serde(default)]
    pub dependencies: Vec<String>,
    #[serde(default)]
    pub source_link: String,
    pub build_command: String,
    #[serde(default)]
    pub metadata: ToolMetadata,
    /// Entry point relative to the tool directory.
    pub entry: String,
    /// Unknown fields, kept verbatim.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ToolSpec {
    pub fn is_eval(&self) -> bool {
        self.metadata.tags.iter().any(|t| t == EVAL_TAG)
    }
}

/// Checks every manifest invariant; an empty list means the spec is valid.
pub fn validate_spec(spec: &ToolSpec) -> Vec<String> {
    let mut violations = Vec::new();
    if spec.name.trim().is_empty() {
        violations.push("name empty".to_string());
    }
    if spec.build_command.trim().is_empty() {
        violations.push("build_command empty".to_string());
    }
    if spec.entry.trim().is_empty() {
        violations.push("entry empty".to_string());
    }
    for (section, io) in [("inputs", &spec.inputs), ("outputs", &spec.outputs)] {
        for entry in io.iter() {
            if entry.name.trim().is_empty() {
                violations.push(format!("{section}: parameter with empty name"));
            }
            if entry.parts().is_none() {
                violations.push(format!(
                    "{section}.{}: `{}` does not follow the \"type - explanation\" shape",
                    entry.name, entry.spec
                ));
            }
        }
    }
    violations
}

/// A validated tool together with the directory it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolHandle {
    pub spec: ToolSpec,
    pub root_dir: PathBuf,
}

impl ToolHandle {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn entry(&self) -> &str {
        &self.spec.entry
    }

    pub fn entry_path(&self) -> PathBuf {
        self.root_dir.join(&self.spec.entry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolKind {
    Solve,
    Eval,
}

/// An ordered, duplicate-free set of tool handles.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolSet {
    kind: ToolKind,
    handles: Vec<ToolHandle>,
}

impl ToolSet {
    pub fn new(kind: ToolKind) -> Self {
        Self {
            kind,
            handles: Vec::new(),
        }
    }

    pub fn from_handles(
        kind: ToolKind,
        handles: impl IntoIterator<Item = ToolHandle>,
    ) -> Result<Self, RegistryError> {
        let mut set = Self::new(kind);
        for handle in handles {
            set.insert(handle)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, handle: ToolHandle) -> Result<(), RegistryError> {
        if self.contains(handle.name()) {
            return Err(RegistryError::DuplicateTool(handle.name().to_string()));
        }
        self.handles.push(handle);
        Ok(())
    }

    /// Adds every handle of `other` not already present.
    pub fn extend_from(&mut self, other: &ToolSet) {
        for handle in &other.handles {
            if !self.contains(handle.name()) {
                self.handles.push(handle.clone());
            }
        }
    }

    pub fn kind(&self) -> ToolKind {
        self.kind
    }

    pub fn get(&self, name: &str) -> Option<&ToolHandle> {
        self.handles.iter().find(|h| h.name() == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn names(&self) -> Vec<String> {
        self.handles.iter().map(|h| h.name().to_string()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ToolHandle> {
        self.handles.iter()
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }
}

/// Problem found while loading a tools directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub message: String,
}

/// Immutable collection of validated tools keyed by name.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    tools: BTreeMap<String, ToolHandle>,
    diagnostics: Vec<Diagnostic>,
}

impl Registry {
    pub fn from_handles(handles: impl IntoIterator<Item = ToolHandle>) -> Self {
        let tools = handles
            .into_iter()
            .map(|h| (h.name().to_string(), h))
            .collect();
        Self {
            tools,
            diagnostics: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ToolHandle> {
        self.tools.get(name)
    }

    /// Handles in lexicographic name order.
    pub fn iter(&self) -> impl Iterator<Item = &ToolHandle> {
        self.tools.values()
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    /// All tools tagged as evaluation-related.
    pub fn eval_tools(&self) -> ToolSet {
        let handles = self.iter().filter(|h| h.spec.is_eval()).cloned().collect();
        ToolSet {
            kind: ToolKind::Eval,
            handles,
        }
    }
}

fn load_manifest(path: &Path) -> Result<ToolSpec, RegistryError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| RegistryError::ManifestParseError {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Loads every `<dir>/<name>/tool.json`. Malformed or invalid manifests are
/// skipped and reported through [`Registry::diagnostics`].
pub fn load_registry(dir: &Path) -> Result<Registry, RegistryError> {
    if !dir.is_dir() {
        return Err(RegistryError::MissingDir(dir.to_path_buf()));
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();

    let mut registry = Registry::default();
    for sub in subdirs {
        let path = sub.join(MANIFEST_FILE);
        if !path.is_file() {
            continue;
        }
        let spec = match load_manifest(&path) {
            Ok(spec) => spec,
            Err(RegistryError::ManifestParseError { path, reason }) => {
                registry.diagnostics.push(Diagnostic {
                    path,
                    message: reason,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut violations = validate_spec(&spec);
        if violations.is_empty() && !sub.join(&spec.entry).is_file() {
            violations.push(format!("entry `{}` not found in tool directory", spec.entry));
        }
        if registry.tools.contains_key(&spec.name) {
            violations.push(format!("duplicate tool name `{}`", spec.name));
        }
        if !violations.is_empty() {
            registry.diagnostics.push(Diagnostic {
                path,
                message: violations.join("; "),
            });
            continue;
        }
        let root_dir = fs::canonicalize(&sub)?;
        registry
            .tools
            .insert(spec.name.clone(), ToolHandle { spec, root_dir });
    }
    Ok(registry)
}

/// Writes one `<dir>/<name>/tool.json` per tool. Entry files are not copied.
pub fn save_registry(dir: &Path, specs: &[ToolSpec]) -> Result<(), RegistryError> {
    for spec in specs {
        let tool_dir = dir.join(&spec.name);
        fs::create_dir_all(&tool_dir)?;
        let text = serde_json::to_string_pretty(spec).expect("tool spec serializes");
        fs::write(tool_dir.join(MANIFEST_FILE), text + "\n")?;
    }
    Ok(())
}

/// Outcome of [`resolve_tools`] in lenient mode.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub tools: ToolSet,
    pub unresolved: Vec<String>,
}

/// Looks up `names` in order. In strict mode the first unknown name fails.
pub fn resolve_tools(
    names: &[String],
    registry: &Registry,
    kind: ToolKind,
    strict: bool,
) -> Result<Resolution, RegistryError> {
    let mut tools = ToolSet::new(kind);
    let mut unresolved = Vec::new();
    for name in names {
        match registry.get(name) {
            Some(handle) => {
                if !tools.contains(name) {
                    tools.handles.push(handle.clone());
                }
            }
            None if strict => return Err(RegistryError::UnknownTool(name.clone())),
            None => unresolved.push(name.clone()),
        }
    }
    Ok(Resolution { tools, unresolved })
}

fn render_tool(handle: &ToolHandle) -> String {
    let spec = &handle.spec;
    let mut out = format!("### {}\n{}\n", spec.name, spec.description.trim());
    for (label, io) in [("Inputs", &spec.inputs), ("Outputs", &spec.outputs)] {
        out.push_str(label);
        out.push_str(":\n");
        for entry in io.iter() {
            out.push_str(&format!("- {}: {}\n", entry.name, entry.spec));
        }
    }
    if let Some(example) = spec.usage_examples.first() {
        out.push_str("Example:\n");
        out.push_str(example.trim_end());
        out.push('\n');
    }
    out
}

/// Renders tools for prompt injection, keeping whole tools only and stopping
/// at the first tool that would exceed `budget` characters.
pub fn describe_for_prompt(tools: &ToolSet, budget: usize) -> String {
    let mut out = String::new();
    let mut used = 0;
    for handle in tools.iter() {
        let block = render_tool(handle);
        let sep = usize::from(!out.is_empty());
        let len = block.chars().count() + sep;
        if used + len > budget {
            break;
        }
        if sep == 1 {
            out.push('\n');
        }
        out.push_str(&block);
        used += len;
    }
    out
}

/// Full text rendering of a spec, used when embedding whole manifests.
pub fn full_text(spec: &ToolSpec) -> String {
    let handle = ToolHandle {
        spec: spec.clone(),
        root_dir: PathBuf::new(),
    };
    render_tool(&handle)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn spec(name: &str) -> ToolSpec {
        ToolSpec {
            name: name.to_string(),
            description: format!("{name} computes things"),
            inputs: IoSpec(vec![IoEntry::new("x", "float - input value")]),
            outputs: IoSpec(vec![IoEntry::new("y", "float - output value")]),
            usage_examples: vec![format!("tools[\"{name}\"].execute(x=1.0)")],
            dependencies: vec!["numpy>=1.20".into()],
            source_link: "https://example.org/tool".into(),
            build_command: "true".into(),
            metadata: ToolMetadata::default(),
            entry: "entry.py".into(),
            extra: Map::new(),
        }
    }

    pub fn write_tool(dir: &Path, spec: &ToolSpec) {
        save_registry(dir, std::slice::from_ref(spec)).unwrap();
        fs::write(
            dir.join(&spec.name).join(&spec.entry),
            "import json,sys\nprint(json.dumps({}))\n",
        )
        .unwrap();
    }

    fn handle(name: &str) -> ToolHandle {
        ToolHandle {
            spec: spec(name),
            root_dir: PathBuf::from("/tools").join(name),
        }
    }

    #[test]
    fn validate_accepts_full_spec() {
        assert!(validate_spec(&spec("A")).is_empty());
    }

    #[test]
    fn validate_flags_empty_name() {
        let mut s = spec("A");
        s.name.clear();
        assert_eq!(validate_spec(&s), vec!["name empty".to_string()]);
    }

    #[test]
    fn validate_flags_single_part_io() {
        let mut s = spec("A");
        s.inputs = IoSpec(vec![IoEntry::new("data", "ndarray")]);
        let v = validate_spec(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("type - explanation"), "{v:?}");
    }

    #[test]
    fn load_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        let reg = load_registry(dir.path()).unwrap();
        assert!(reg.is_empty());
        assert!(reg.diagnostics().is_empty());
    }

    #[test]
    fn load_missing_dir() {
        let err = load_registry(Path::new("/nonexistent/tools/dir")).unwrap_err();
        assert!(matches!(err, RegistryError::MissingDir(_)));
    }

    #[test]
    fn load_three_valid() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["A", "B", "C"] {
            write_tool(dir.path(), &spec(n));
        }
        let reg = load_registry(dir.path()).unwrap();
        assert_eq!(reg.len(), 3);
        assert!(reg.diagnostics().is_empty());
    }

    #[test]
    fn load_manifest_without_name() {
        let dir = tempfile::tempdir().unwrap();
        write_tool(dir.path(), &spec("A"));
        let path = dir.path().join("A").join(MANIFEST_FILE);
        let mut value: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        value.as_object_mut().unwrap().remove("name");
        fs::write(&path, value.to_string()).unwrap();

        let reg = load_registry(dir.path()).unwrap();
        assert_eq!(reg.len(), 0);
        assert_eq!(reg.diagnostics().len(), 1);
        assert_eq!(reg.diagnostics()[0].path, path);
        assert!(reg.diagnostics()[0].message.contains("name"));
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec("A");
        s.extra.insert("version_hint".into(), Value::from("2.1"));
        s.metadata.extra.insert("maintainer".into(), Value::from("lab"));
        write_tool(dir.path(), &s);
        let reg = load_registry(dir.path()).unwrap();
        assert_eq!(reg.get("A").unwrap().spec, s);
    }

    #[test]
    fn resolve_subsets_and_strict_mode() {
        let reg = Registry::from_handles(["A", "B", "C"].map(handle));
        let empty = resolve_tools(&[], &reg, ToolKind::Solve, true).unwrap();
        assert!(empty.tools.is_empty());

        let names = vec!["A".to_string(), "B".to_string()];
        let res = resolve_tools(&names, &reg, ToolKind::Solve, true).unwrap();
        assert_eq!(res.tools.names(), names);

        let names = vec!["A".to_string(), "Z".to_string()];
        match resolve_tools(&names, &reg, ToolKind::Solve, true) {
            Err(RegistryError::UnknownTool(n)) => assert_eq!(n, "Z"),
            other => panic!("unexpected {other:?}"),
        }
        let lenient = resolve_tools(&names, &reg, ToolKind::Solve, false).unwrap();
        assert_eq!(lenient.tools.names(), vec!["A".to_string()]);
        assert_eq!(lenient.unresolved, vec!["Z".to_string()]);
    }

    #[test]
    fn describe_empty_and_single() {
        assert_eq!(describe_for_prompt(&ToolSet::new(ToolKind::Solve), 100), "");
        let set = ToolSet::from_handles(ToolKind::Solve, [handle("A")]).unwrap();
        let text = describe_for_prompt(&set, 100_000);
        assert!(text.contains("### A"));
        assert!(text.contains("- x: float - input value"));
        assert!(text.contains("- y: float - output value"));
    }

    #[test]
    fn describe_truncates_whole_tools() {
        let set = ToolSet::from_handles(ToolKind::Solve, [handle("A"), handle("B")]).unwrap();
        let first_len = render_tool(set.get("A").unwrap()).chars().count();
        let text = describe_for_prompt(&set, first_len + 5);
        assert!(text.contains("### A"));
        assert!(!text.contains("### B"));
        assert_eq!(text.chars().count(), first_len);
    }

    proptest::proptest! {
        #[test]
        fn describe_is_monotone_in_budget(a in 1usize..2000, b in 1usize..2000) {
            let set = ToolSet::from_handles(
                ToolKind::Solve,
                ["A", "B", "C", "D"].map(handle),
            ).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let small = describe_for_prompt(&set, lo);
            let large = describe_for_prompt(&set, hi);
            proptest::prop_assert!(large.starts_with(&small));
            proptest::prop_assert!(small.chars().count() <= lo);
            proptest::prop_assert_eq!(describe_for_prompt(&set, lo), small);
        }

        #[test]
        fn resolve_returns_registry_members(names in proptest::collection::vec("[A-F]", 0..8)) {
            let reg = Registry::from_handles(["A", "B", "C"].map(handle));
            let res = resolve_tools(&names, &reg, ToolKind::Solve, false).unwrap();
            for n in res.tools.names() {
                proptest::prop_assert!(reg.get(&n).is_some());
            }
        }
    }
}
