//! The solver code template and the structural lint every generated solver
//! and evaluator must pass.
//!
//! A solver instantiates the template: imports, helpers, and an entry
//! `def solve(tools, <kw>=<default>, ...)`, preceded by a header block that
//! makes the keyword parameters machine-readable:
//!
//! ```text
//! # [parameters]
//! # beam_size: int = 10
//! # spectra_path: str = "spectra_test.npy"
//! # [/parameters]
//! ```

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::pylit;
use crate::registry::ToolSet;

pub const HEADER_OPEN: &str = "# [parameters]";
pub const HEADER_CLOSE: &str = "# [/parameters]";
pub const SECTION_MARKERS: [&str; 3] = ["# [imports]", "# [helpers]", "# [entry]"];

static TOOL_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"tools\s*\[\s*(?:"([^"\n]+)"|'([^'\n]+)')\s*\]"#).expect("regex"));
static SOLVE_DEF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^def\s+solve\s*\(").expect("regex"));
static HEADER_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^#\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?::\s*([^=]*?))?\s*(?:=\s*(.*?))?\s*$").expect("regex")
});

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("template violation: {}", .0.join("; "))]
    TemplateViolation(Vec<String>),
}

/// One keyword parameter declared in the header block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaderParam {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    /// Default as written in the header.
    pub default_src: String,
    /// Default parsed as a literal, when it is one.
    pub default: Option<Value>,
}

/// The template handed to generation prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeTemplate {
    text: String,
}

impl CodeTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, TemplateError> {
        let text = text.into();
        let mut missing = Vec::new();
        if !SOLVE_DEF.is_match(&text) {
            missing.push("template lacks the solve entry".to_string());
        }
        if parse_header(&text).is_none() {
            missing.push("template lacks the parameter header block".to_string());
        }
        if missing.is_empty() {
            Ok(Self { text })
        } else {
            Err(TemplateError::TemplateViolation(missing))
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Section markers present in the template, in order of appearance.
    pub fn sections(&self) -> Vec<&'static str> {
        let mut found: Vec<(usize, &'static str)> = SECTION_MARKERS
            .iter()
            .filter_map(|m| self.text.find(m).map(|i| (i, *m)))
            .collect();
        found.sort();
        found.into_iter().map(|(_, m)| m).collect()
    }
}

/// Parses the header block. `None` when the block is absent or unterminated.
pub fn parse_header(code: &str) -> Option<Vec<HeaderParam>> {
    let mut lines = code.lines().map(str::trim);
    lines.by_ref().find(|l| *l == HEADER_OPEN)?;
    let mut params = Vec::new();
    for line in lines {
        if line == HEADER_CLOSE {
            return Some(params);
        }
        if line.trim_start_matches('#').trim().is_empty() {
            continue;
        }
        let Some(caps) = HEADER_LINE.captures(line) else {
            continue;
        };
        let default_src = caps.get(3).map_or("", |m| m.as_str()).to_string();
        params.push(HeaderParam {
            name: caps[1].to_string(),
            ty: caps.get(2).map_or("", |m| m.as_str().trim()).to_string(),
            default: pylit::parse(&default_src).ok(),
            default_src,
        });
    }
    None
}

/// A parameter of the `solve` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryParam {
    pub name: String,
    pub has_default: bool,
}

/// Parameters of `def solve(...)`, excluding `*`, `/` and `**rest`.
pub fn solve_params(code: &str) -> Option<Vec<EntryParam>> {
    let m = SOLVE_DEF.find(code)?;
    let inner = balanced_parens(&code[m.end()..])?;
    let mut params = Vec::new();
    for raw in split_top_level(inner) {
        let p = raw.trim();
        if p.is_empty() || p == "*" || p == "/" || p.starts_with("**") {
            continue;
        }
        let p = p.trim_start_matches('*');
        let name_end = p.find([':', '=']).unwrap_or(p.len());
        params.push(EntryParam {
            name: p[..name_end].trim().to_string(),
            has_default: p.contains('='),
        });
    }
    Some(params)
}

fn balanced_parens(s: &str) -> Option<&str> {
    let mut depth = 1usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[..i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        if let Some(q) = quote {
            if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Every `tools["Name"]` reference in `code`.
pub fn tool_references(code: &str) -> BTreeSet<String> {
    TOOL_REF
        .captures_iter(code)
        .filter_map(|c| c.get(1).or_else(|| c.get(2)).map(|m| m.as_str().to_string()))
        .collect()
}

/// Structural violations of a solver against the template contract.
pub fn solver_violations(code: &str, tools: &ToolSet) -> Vec<String> {
    let mut out = Vec::new();
    let params = solve_params(code);
    match &params {
        None => out.push("missing entry function `def solve(tools, ...)`".to_string()),
        Some(ps) => {
            if ps.first().map(|p| p.name.as_str()) != Some("tools") {
                out.push("first parameter of solve() must be `tools`".to_string());
            }
            for p in ps.iter().skip(1) {
                if !p.has_default {
                    out.push(format!("parameter `{}` of solve() has no default", p.name));
                }
            }
        }
    }
    match parse_header(code) {
        None => out.push(format!("missing parameter header block `{HEADER_OPEN}` ... `{HEADER_CLOSE}`")),
        Some(header) => {
            if let Some(ps) = &params {
                let declared: BTreeSet<&str> = header.iter().map(|h| h.name.as_str()).collect();
                let accepted: BTreeSet<&str> = ps.iter().skip(1).map(|p| p.name.as_str()).collect();
                for name in accepted.difference(&declared) {
                    out.push(format!("parameter `{name}` missing from header block"));
                }
                for name in declared.difference(&accepted) {
                    out.push(format!("header declares `{name}` but solve() does not accept it"));
                }
            }
        }
    }
    for name in tool_references(code) {
        if !tools.contains(&name) {
            out.push(format!("references undeclared tool `{name}`"));
        }
    }
    out
}

pub fn lint_solver(code: &str, tools: &ToolSet) -> Result<(), TemplateError> {
    let v = solver_violations(code, tools);
    if v.is_empty() {
        Ok(())
    } else {
        Err(TemplateError::TemplateViolation(v))
    }
}

/// Structural violations of an evaluator: it must read the result manifest
/// path from its args and write the score manifest.
pub fn evaluator_violations(code: &str, tools: &ToolSet) -> Vec<String> {
    let mut out = Vec::new();
    if code.trim().is_empty() {
        out.push("evaluator is empty".to_string());
    }
    if !code.contains("result_path") {
        out.push("evaluator does not read `result_path`".to_string());
    }
    if !code.contains("score.json") {
        out.push("evaluator does not write `score.json`".to_string());
    }
    for name in tool_references(code) {
        if !tools.contains(&name) {
            out.push(format!("references undeclared tool `{name}`"));
        }
    }
    out
}

pub fn lint_evaluator(code: &str, tools: &ToolSet) -> Result<(), TemplateError> {
    let v = evaluator_violations(code, tools);
    if v.is_empty() {
        Ok(())
    } else {
        Err(TemplateError::TemplateViolation(v))
    }
}

/// String and numeric literals found in Python source, comments excluded.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Literals {
    pub strings: BTreeSet<String>,
    pub numbers: Vec<f64>,
}

impl Literals {
    pub fn has_number(&self, x: f64) -> bool {
        self.numbers.iter().any(|&n| n == x)
    }
}

/// Lexes `code` for literals. Prefixed strings (`r`, `b`, `f`) count; numbers
/// are the unsigned literal tokens, so `-3` yields `3`.
pub fn python_literals(code: &str) -> Literals {
    let mut lits = Literals::default();
    let chars: Vec<char> = code.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '"' || c == '\'' {
            let triple = i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c;
            let open = if triple { 3 } else { 1 };
            let mut j = i + open;
            let mut body = String::new();
            loop {
                if j >= chars.len() {
                    break;
                }
                if chars[j] == '\\' && j + 1 < chars.len() {
                    body.push(chars[j]);
                    body.push(chars[j + 1]);
                    j += 2;
                    continue;
                }
                if chars[j] == c
                    && (!triple || (j + 2 < chars.len() && chars[j + 1] == c && chars[j + 2] == c))
                {
                    j += open;
                    break;
                }
                if !triple && chars[j] == '\n' {
                    break;
                }
                body.push(chars[j]);
                j += 1;
            }
            let quoted = format!("{c}{body}{c}");
            let value = match pylit::parse(&quoted) {
                Ok(Value::String(s)) => s,
                _ => body,
            };
            lits.strings.insert(value);
            i = j;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let prev_ident = i > 0 && (chars[i - 1].is_alphanumeric() || chars[i - 1] == '_');
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric()
                    || chars[j] == '.'
                    || chars[j] == '_'
                    || ((chars[j] == '-' || chars[j] == '+') && matches!(chars[j - 1], 'e' | 'E')))
            {
                j += 1;
            }
            if !prev_ident {
                let text: String = chars[i..j].iter().filter(|&&ch| ch != '_').collect();
                if let Ok(x) = text.parse::<f64>() {
                    lits.numbers.push(x);
                } else if let Ok(x) = i64::from_str_radix(text.trim_start_matches("0x"), 16) {
                    if text.starts_with("0x") {
                        lits.numbers.push(x as f64);
                    }
                }
            }
            i = j;
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            continue;
        }
        i += 1;
    }
    lits
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::registry::{ToolHandle, ToolKind};
    use std::path::PathBuf;

    pub const SAMPLE: &str = r#"import json

# [parameters]
# spectra_path: str = "spectra_test.npy"
# beam_size: int = 10
# [/parameters]

def _helper(x):
    return x

def solve(tools, spectra_path="spectra_test.npy", beam_size=10):
    out = tools["SpectraToSmiles"].execute(path=spectra_path, beam=beam_size)
    return out
"#;

    pub fn toolset(names: &[&str]) -> ToolSet {
        ToolSet::from_handles(
            ToolKind::Solve,
            names.iter().map(|n| ToolHandle {
                spec: crate::registry::tests::spec(n),
                root_dir: PathBuf::from("/nonexistent"),
            }),
        )
        .unwrap()
    }

    #[test]
    fn header_is_parsed() {
        let h = parse_header(SAMPLE).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].name, "spectra_path");
        assert_eq!(h[0].ty, "str");
        assert_eq!(h[0].default, Some(Value::from("spectra_test.npy")));
        assert_eq!(h[1].default, Some(Value::from(10)));
        assert!(parse_header("# [parameters]\n# a: int = 1\n").is_none());
    }

    #[test]
    fn solve_signature_is_parsed() {
        let ps = solve_params(SAMPLE).unwrap();
        let names: Vec<_> = ps.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["tools", "spectra_path", "beam_size"]);
        let multi = "def solve(\n    tools,\n    shape=(1, 2),\n    *,\n    label: str = 'a,b',\n    **rest,\n):\n    pass\n";
        let ps = solve_params(multi).unwrap();
        let names: Vec<_> = ps.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["tools", "shape", "label"]);
    }

    #[test]
    fn well_formed_solver_passes() {
        assert_eq!(solver_violations(SAMPLE, &toolset(&["SpectraToSmiles"])), Vec::<String>::new());
    }

    #[test]
    fn violations_are_reported() {
        let tools = toolset(&["SpectraToSmiles"]);
        let no_entry = SAMPLE.replace("def solve(", "def run(");
        assert!(solver_violations(&no_entry, &tools)[0].contains("missing entry"));

        let undeclared = SAMPLE.replace("SpectraToSmiles", "Zap");
        let v = solver_violations(&undeclared, &tools);
        assert_eq!(v, vec!["references undeclared tool `Zap`".to_string()]);

        let no_header = SAMPLE.replace(HEADER_OPEN, "#");
        assert!(solver_violations(&no_header, &tools).iter().any(|m| m.contains("header block")));

        let extra = SAMPLE.replace("beam_size=10)", "beam_size=10, seed=0)");
        assert!(solver_violations(&extra, &tools).iter().any(|m| m.contains("`seed` missing")));

        let no_default = SAMPLE.replace("beam_size=10)", "beam_size)");
        assert!(solver_violations(&no_default, &tools).iter().any(|m| m.contains("no default")));
    }

    #[test]
    fn tool_reference_extraction() {
        let code = "a = tools['A'].execute()\nb = tools[ \"B C\" ]\nc = mytools\n";
        let refs: Vec<_> = tool_references(code).into_iter().collect();
        assert_eq!(refs, ["A", "B C"]);
        assert!(tool_references("x = 1").is_empty());
    }

    #[test]
    fn evaluator_lint() {
        let tools = toolset(&[]);
        let ok = "import json\na = json.load(open('args.json'))\nr = a['result_path']\njson.dump({'score': 1}, open('score.json', 'w'))\n";
        assert!(lint_evaluator(ok, &tools).is_ok());
        let bad = "print(1)\n";
        match lint_evaluator(bad, &tools) {
            Err(TemplateError::TemplateViolation(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn literal_lexing() {
        let code = "x = 'CCO'  # 'not this'\ny = \"a\\\"b\"\nz = 3.25 + 1e-3 - 7\nw = v2 + f'{x}'\ns = '''multi\nline'''\n";
        let l = python_literals(code);
        assert!(l.strings.contains("CCO"));
        assert!(!l.strings.contains("not this"));
        assert!(l.strings.contains("a\"b"));
        assert!(l.strings.contains("multi\nline"));
        assert!(l.has_number(3.25) && l.has_number(0.001) && l.has_number(7.0));
        assert!(!l.has_number(2.0));
    }

    #[test]
    fn template_sections() {
        let t = CodeTemplate::new(format!("# [imports]\n# [helpers]\n# [entry]\n{SAMPLE}")).unwrap();
        assert_eq!(t.sections(), SECTION_MARKERS.to_vec());
        assert!(CodeTemplate::new("print(1)").is_err());
    }
}
