//! Prompt templates with `{{slot}}` placeholders, loaded from `<dir>/<id>.txt`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LlmError;

/// Slot values keyed by placeholder name.
pub type Slots = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptId {
    #[serde(rename = "p_cls")]
    Cls,
    #[serde(rename = "p_fm")]
    Fm,
    #[serde(rename = "p_plan")]
    Plan,
    #[serde(rename = "p_gen")]
    Gen,
    #[serde(rename = "p_dbg")]
    Dbg,
    #[serde(rename = "p_ref")]
    Ref,
    #[serde(rename = "p_plan_eval")]
    PlanEval,
    #[serde(rename = "p_gen_eval")]
    GenEval,
    #[serde(rename = "p_gen_eval_assist")]
    GenEvalAssist,
    #[serde(rename = "p_cross_e1")]
    CrossE1,
    #[serde(rename = "p_cross_e2")]
    CrossE2,
    #[serde(rename = "p_mut_m1")]
    MutM1,
    #[serde(rename = "p_mut_m2")]
    MutM2,
    #[serde(rename = "p_mut_m3")]
    MutM3,
    #[serde(rename = "p_param")]
    Param,
}

impl PromptId {
    pub const ALL: [PromptId; 15] = [
        PromptId::Cls,
        PromptId::Fm,
        PromptId::Plan,
        PromptId::Gen,
        PromptId::Dbg,
        PromptId::Ref,
        PromptId::PlanEval,
        PromptId::GenEval,
        PromptId::GenEvalAssist,
        PromptId::CrossE1,
        PromptId::CrossE2,
        PromptId::MutM1,
        PromptId::MutM2,
        PromptId::MutM3,
        PromptId::Param,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptId::Cls => "p_cls",
            PromptId::Fm => "p_fm",
            PromptId::Plan => "p_plan",
            PromptId::Gen => "p_gen",
            PromptId::Dbg => "p_dbg",
            PromptId::Ref => "p_ref",
            PromptId::PlanEval => "p_plan_eval",
            PromptId::GenEval => "p_gen_eval",
            PromptId::GenEvalAssist => "p_gen_eval_assist",
            PromptId::CrossE1 => "p_cross_e1",
            PromptId::CrossE2 => "p_cross_e2",
            PromptId::MutM1 => "p_mut_m1",
            PromptId::MutM2 => "p_mut_m2",
            PromptId::MutM3 => "p_mut_m3",
            PromptId::Param => "p_param",
        }
    }

    /// Classification and extraction prompts run at the parsing temperature.
    pub fn is_parsing(self) -> bool {
        matches!(self, PromptId::Cls | PromptId::Fm | PromptId::Param)
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptId {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| LlmError::PromptLoad {
                id: s.to_string(),
                reason: "unknown prompt id".into(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub body: String,
    pub required_slots: BTreeSet<String>,
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Yields `(start, end, name)` for each `{{name}}` placeholder in `body`.
fn placeholders(body: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(open) = body[pos..].find("{{") {
        let start = pos + open;
        let Some(close) = body[start + 2..].find("}}") else {
            break;
        };
        let name = &body[start + 2..start + 2 + close];
        if is_slot_name(name) {
            let end = start + 2 + close + 2;
            out.push((start, end, name));
            pos = end;
        } else {
            pos = start + 2;
        }
    }
    out
}

impl PromptTemplate {
    pub fn new(id: PromptId, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_slots = placeholders(&body)
            .into_iter()
            .map(|(_, _, name)| name.to_string())
            .collect();
        Self {
            id,
            body,
            required_slots,
        }
    }
}

/// Substitutes every placeholder in one pass. Extra slots are ignored and slot
/// values are never re-expanded.
pub fn render_prompt(tpl: &PromptTemplate, slots: &Slots) -> Result<String, LlmError> {
    if let Some(missing) = tpl.required_slots.iter().find(|s| !slots.contains_key(*s)) {
        return Err(LlmError::MissingSlot(missing.clone()));
    }
    let mut out = String::with_capacity(tpl.body.len());
    let mut last = 0;
    for (start, end, name) in placeholders(&tpl.body) {
        out.push_str(&tpl.body[last..start]);
        out.push_str(&slots[name]);
        last = end;
    }
    out.push_str(&tpl.body[last..]);
    Ok(out)
}

/// Every prompt template, plus an optional shared system message.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    templates: BTreeMap<PromptId, PromptTemplate>,
    system: Option<String>,
    code_template: String,
}

/// File holding the solver code template shown to generation prompts.
pub const CODE_TEMPLATE_FILE: &str = "code_template.txt";
const SYSTEM_FILE: &str = "system.txt";

impl PromptLibrary {
    pub fn load(dir: &Path) -> Result<Self, LlmError> {
        let read = |name: &str| {
            fs::read_to_string(dir.join(name)).map_err(|e| LlmError::PromptLoad {
                id: name.to_string(),
                reason: format!("{}: {e}", dir.join(name).display()),
            })
        };
        let mut templates = BTreeMap::new();
        for id in PromptId::ALL {
            let body = read(&format!("{}.txt", id.as_str()))?;
            templates.insert(id, PromptTemplate::new(id, body));
        }
        let system = dir
            .join(SYSTEM_FILE)
            .is_file()
            .then(|| read(SYSTEM_FILE))
            .transpose()?;
        let code_template = read(CODE_TEMPLATE_FILE)?;
        Ok(Self {
            templates,
            system,
            code_template,
        })
    }

    pub fn template(&self, id: PromptId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn system(&self) -> Option<&str> {
        self.system.as_deref()
    }

    pub fn code_template(&self) -> &str {
        &self.code_template
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slots(pairs: &[(&str, &str)]) -> Slots {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn zero_slot_template_is_unchanged() {
        let tpl = PromptTemplate::new(PromptId::Cls, "plain {json: 1} body");
        assert!(tpl.required_slots.is_empty());
        assert_eq!(render_prompt(&tpl, &Slots::new()).unwrap(), tpl.body);
    }

    #[test]
    fn missing_slot_errors() {
        let tpl = PromptTemplate::new(PromptId::Cls, "Q: {{question}}");
        match render_prompt(&tpl, &Slots::new()) {
            Err(LlmError::MissingSlot(s)) => assert_eq!(s, "question"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn values_are_not_re_expanded() {
        let tpl = PromptTemplate::new(PromptId::Gen, "{{a}} and {{b}}");
        let out = render_prompt(&tpl, &slots(&[("a", "{{b}}"), ("b", "x"), ("extra", "y")])).unwrap();
        assert_eq!(out, "{{b}} and x");
    }

    #[test]
    fn shipped_library_loads_and_classifier_renders() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../prompts");
        let lib = PromptLibrary::load(&dir).unwrap();
        let out = render_prompt(lib.template(PromptId::Cls), &slots(&[("question", "Q")])).unwrap();
        assert!(out.contains('Q'));
        assert!(lib.code_template().contains("def solve(tools"));
        for id in PromptId::ALL {
            assert!(!lib.template(id).body.trim().is_empty(), "{id}");
        }
    }

    proptest::proptest! {
        #[test]
        fn full_render_leaves_no_placeholders(
            names in proptest::collection::btree_set("[a-z]{1,6}", 0..5),
            value in "[a-zA-Z0-9 ]{0,12}",
        ) {
            let body: String = names.iter().map(|n| format!("<{{{{{n}}}}}>")).collect();
            let tpl = PromptTemplate::new(PromptId::Plan, body);
            let s: Slots = names.iter().map(|n| (n.clone(), value.clone())).collect();
            let out = render_prompt(&tpl, &s).unwrap();
            proptest::prop_assert!(placeholders(&out).is_empty());
            proptest::prop_assert_eq!(render_prompt(&tpl, &s).unwrap(), out);
        }
    }
}
