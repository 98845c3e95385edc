//! A hermetic backend that answers from the prompt text alone, using fixed
//! heuristics per template. It exists so the whole pipeline runs offline.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde_json::{json, Value};

use super::{template_of, Backend, ChatMessage, LlmError, Role, DEFAULT_CONTEXT_LIMIT};

static ELEMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^- (e\d+) <([a-z0-9]+)>(.*)$").unwrap());
static ATTR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"([a-z][a-z0-9_-]*)="((?:[^"\\]|\\.)*)""#).unwrap());
static NAV: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^NAV \d+ (e\d+) -> (\S+)$").unwrap());

const TEST_FIELD_VALIDATION: &str = "field_validation";
const TEST_ERROR_HANDLING: &str = "error_handling";
const TEST_NAVIGATION: &str = "navigation";

const TEXT_TYPES: [&str; 7] = ["", "text", "email", "password", "tel", "number", "search"];

#[derive(Debug, Default, Clone)]
pub struct RuleMockBackend;

#[derive(Debug)]
struct Element {
    id: String,
    tag: String,
    attrs: Vec<(String, String)>,
    interactive: bool,
}

impl Element {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    fn input_type(&self) -> &str {
        self.attr("type").unwrap_or("")
    }

    fn is_text_input(&self) -> bool {
        self.interactive && self.tag == "input" && TEXT_TYPES.contains(&self.input_type())
            || self.interactive && self.tag == "textarea"
    }

    fn is_submit(&self) -> bool {
        self.interactive
            && match self.tag.as_str() {
                "button" => !matches!(self.input_type(), "reset" | "button"),
                "input" => self.input_type() == "submit",
                _ => false,
            }
    }

    fn slot_name(&self) -> String {
        let raw = self.attr("name").or(self.attr("id")).unwrap_or(&self.id);
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
            .collect()
    }
}

fn elements(prompt: &str) -> Vec<Element> {
    prompt
        .lines()
        .filter_map(|line| {
            let caps = ELEMENT.captures(line)?;
            let rest = &caps[3];
            Some(Element {
                id: caps[1].to_string(),
                tag: caps[2].to_string(),
                attrs: ATTR
                    .captures_iter(rest)
                    .map(|a| (a[1].to_string(), a[2].replace("\\\"", "\"").replace("\\\\", "\\")))
                    .collect(),
                interactive: rest.split_whitespace().any(|w| w == "interactive"),
            })
        })
        .collect()
}

fn field<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim)
}

fn page_type(prompt: &str) -> &'static str {
    let els = elements(prompt);
    let inputs = els.iter().filter(|e| e.is_text_input()).count();
    if els.iter().any(|e| e.input_type() == "password") {
        if inputs <= 2 { "login" } else { "signup" }
    } else if inputs >= 3 {
        "form"
    } else {
        "static"
    }
}

fn accepted_names(prompt: &str) -> BTreeSet<String> {
    prompt
        .lines()
        .skip_while(|l| *l != "ACCEPTED CASES")
        .skip(1)
        .take_while(|l| l.starts_with("- ") || *l == "(none)")
        .filter_map(|l| l.strip_prefix("- ")?.split_once(' ').map(|(_, name)| name.to_lowercase()))
        .collect()
}

fn test_cases(prompt: &str) -> Value {
    let required: Vec<&str> = field(prompt, "REQUIRED TYPES ")
        .map(|t| t.split(", ").collect())
        .unwrap_or_default();
    let pick = |preferred: &str| {
        if required.contains(&preferred) {
            Some(preferred.to_string())
        } else {
            required.first().map(|s| s.to_string())
        }
    };
    let Some(target) = field(prompt, "TARGET PAGE ") else {
        return json!({"cases": []});
    };
    let seen = accepted_names(prompt);
    let els = elements(prompt);
    let inputs: Vec<&Element> = els.iter().filter(|e| e.is_text_input()).collect();
    let submit = els.iter().find(|e| e.is_submit());
    let login = inputs.iter().any(|e| e.input_type() == "password") && inputs.len() <= 2;
    let mut cases = Vec::new();

    if let (Some(submit), false) = (submit, inputs.is_empty()) {
        let (subject, what) = if login { ("Login", "credentials") } else { ("Submit form", "data") };
        let typing = |invalid: bool| -> (Vec<Value>, Vec<Value>) {
            let mut steps = Vec::new();
            let mut slots = Vec::new();
            for (i, e) in inputs.iter().enumerate() {
                // distinct slot names keep the two step sequences apart
                let slot = if invalid { format!("{}_invalid", e.slot_name()) } else { e.slot_name() };
                steps.push(json!({"verb": "type", "target": e.id, "argument": format!("slot:{slot}")}));
                let scenario = if invalid && i == 0 { "invalid" } else { "valid" };
                slots.push(json!({"element_id": e.id, "slot": slot, "scenario": scenario}));
            }
            steps.push(json!({"verb": "click", "target": submit.id}));
            (steps, slots)
        };
        let (steps, slots) = typing(false);
        cases.push(json!({
            "name": format!("{subject} with valid {what}"),
            "priority": "High",
            "description": format!("Fill every field on {target} with valid values and submit."),
            "test_type": pick(TEST_FIELD_VALIDATION),
            "target_page": target,
            "steps": steps,
            "expected": ["the submission is accepted"],
            "data_slots": slots,
        }));
        let (steps, slots) = typing(true);
        cases.push(json!({
            "name": format!("{subject} with invalid {what}"),
            "priority": "Medium",
            "description": format!("Submit {target} with an invalid first field."),
            "test_type": pick(TEST_ERROR_HANDLING),
            "target_page": target,
            "steps": steps,
            "expected": ["an error message is shown"],
            "data_slots": slots,
        }));
        cases.push(json!({
            "name": format!("{subject} with empty fields"),
            "priority": "Medium",
            "description": format!("Submit {target} without filling any field."),
            "test_type": pick(TEST_FIELD_VALIDATION),
            "target_page": target,
            "steps": [{"verb": "click", "target": submit.id}],
            "expected": ["the submission is refused"],
        }));
    }

    if required.contains(&TEST_NAVIGATION) {
        let navs = prompt.lines().filter_map(|l| NAV.captures(l)).take(2);
        for nav in navs {
            let to = &nav[2];
            let label = url::Url::parse(to).map(|u| u.path().to_string()).unwrap_or_else(|_| to.to_string());
            cases.push(json!({
                "name": format!("Navigate to {label}"),
                "priority": "Medium",
                "description": format!("Follow the link from {target} to {to}."),
                "test_type": TEST_NAVIGATION,
                "target_page": target,
                "steps": [
                    {"verb": "click", "target": &nav[1]},
                    {"verb": "assert_url", "target": to}
                ],
                "expected": [format!("the browser shows {to}")],
            }));
        }
    }

    cases.retain(|c| c["test_type"].is_string() && !seen.contains(&c["name"].as_str().unwrap_or("").to_lowercase()));
    json!({ "cases": cases })
}

fn normalized(s: &str) -> String {
    s.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_lowercase()
}

fn data_mappings(prompt: &str) -> Value {
    let columns: Vec<&str> = field(prompt, "COLUMNS ").map(|c| c.split(", ").collect()).unwrap_or_default();
    let mappings: Vec<Value> = prompt
        .lines()
        .filter_map(|l| l.strip_prefix("SLOT ")?.split_whitespace().next())
        .map(|slot| {
            let wanted = normalized(slot);
            let column = columns.iter().find(|c| {
                let c = normalized(c);
                !c.is_empty() && (c.contains(&wanted) || wanted.contains(&c))
            });
            json!({"slot": slot, "column": column})
        })
        .collect();
    json!({ "mappings": mappings })
}

fn summary(prompt: &str) -> String {
    let totals = field(prompt, "TOTALS ").unwrap_or("no results");
    let failed: Vec<&str> = prompt.lines().filter_map(|l| l.strip_prefix("FAILED ")).collect();
    if failed.is_empty() {
        format!("Run summary: {totals}. Every executed case passed.")
    } else {
        format!("Run summary: {totals}. Failing cases: {}.", failed.join("; "))
    }
}

impl Backend for RuleMockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn context_limit(&self) -> usize {
        DEFAULT_CONTEXT_LIMIT
    }

    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let prompt = messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let reply = match template_of(prompt) {
            Some("page_type.v1") => json!({ "page_type": page_type(prompt) }).to_string(),
            Some("testgen.v1") => test_cases(prompt).to_string(),
            // the mock never proposes a case it would need to fix
            Some("testgen.refine.v1") => json!({ "cases": [] }).to_string(),
            Some("data_mapping.v1") => data_mappings(prompt).to_string(),
            Some("report_summary.v1") => summary(prompt),
            other => {
                return Err(LlmError::BackendUnavailable(format!(
                    "rule-mock has no rule for template {}",
                    other.unwrap_or("(none)")
                )))
            }
        };
        Ok(reply)
    }
}
