//! Draft parsing, the four-stage case validator and priority assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{
    DataSlot, Priority, RequiredTypes, TestCase, TestStep, TestType, Verb,
};
use crate::data::{FieldConstraint, Scenario};
use crate::dom::ElementId;
use crate::site::SiteRepresentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectKind {
    Structural,
    Uniqueness,
    Contextual,
    Flow,
}

impl RejectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectKind::Structural => "structural",
            RejectKind::Uniqueness => "uniqueness",
            RejectKind::Contextual => "contextual",
            RejectKind::Flow => "flow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectReason {
    pub kind: RejectKind,
    pub detail: String,
}

impl RejectReason {
    fn new(kind: RejectKind, detail: impl Into<String>) -> Self {
        Self { kind, detail: detail.into() }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.as_str(), self.detail)
    }
}

/// A case as the model returns it, before ids and constraints are attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDraft {
    pub name: String,
    pub priority: String,
    pub description: String,
    pub test_type: String,
    pub target_page: String,
    pub steps: Vec<StepDraft>,
    pub expected: Vec<String>,
    #[serde(default)]
    pub data_slots: Vec<SlotDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDraft {
    pub verb: String,
    pub target: String,
    #[serde(default)]
    pub argument: Option<String>,
    #[serde(default)]
    pub page: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDraft {
    pub element_id: String,
    pub slot: String,
    #[serde(default)]
    pub page: Option<String>,
    #[serde(default)]
    pub scenario: Option<String>,
}

fn resolve(site: &SiteRepresentation, raw: &str) -> String {
    site.resolve_url(raw).unwrap_or_else(|| raw.to_string())
}

fn constraint_for(site: &SiteRepresentation, page: &str, element: &ElementId) -> FieldConstraint {
    let entry = site.page(page);
    match entry.and_then(|p| p.element(element)) {
        Some(digest) => FieldConstraint::for_element(digest, entry),
        None => FieldConstraint::new(crate::data::ConstraintKind::Text),
    }
}

/// Turns a draft into a case with id `id`. Unknown verbs and scenarios are
/// structural errors; an unknown priority is left for [`assign_priority`]
/// (the case carries `Medium` until then). Slots referenced by `type`
/// steps but not declared are inferred with the `valid` scenario.
pub fn case_from_draft(
    draft: &CaseDraft,
    id: &str,
    site: &SiteRepresentation,
) -> Result<TestCase, Vec<RejectReason>> {
    let mut errors = Vec::new();
    let target_page = resolve(site, &draft.target_page);
    let mut steps = Vec::new();
    for (i, step) in draft.steps.iter().enumerate() {
        let Some(verb) = Verb::parse(&step.verb) else {
            errors.push(RejectReason::new(
                RejectKind::Structural,
                format!("step {}: unknown verb `{}`", i + 1, step.verb),
            ));
            continue;
        };
        let target = if verb.takes_url() { resolve(site, &step.target) } else { step.target.trim().to_string() };
        steps.push(TestStep {
            ordinal: i + 1,
            verb,
            target,
            page: step.page.as_deref().map(|p| resolve(site, p)).filter(|p| *p != target_page),
            argument: step.argument.clone(),
        });
    }

    let mut data_slots = Vec::new();
    for slot in &draft.data_slots {
        let scenario = match slot.scenario.as_deref().map(str::parse::<Scenario>) {
            None => Scenario::Valid,
            Some(Ok(s)) => s,
            Some(Err(e)) => {
                errors.push(RejectReason::new(RejectKind::Structural, format!("slot {}: {e}", slot.slot)));
                continue;
            }
        };
        let page = slot.page.as_deref().map(|p| resolve(site, p)).filter(|p| *p != target_page);
        let element_id = ElementId::new(slot.element_id.trim());
        let constraint = constraint_for(site, page.as_deref().unwrap_or(&target_page), &element_id);
        data_slots.push(DataSlot { element_id, page, slot: slot.slot.trim().to_string(), constraint, scenario });
    }
    for step in &steps {
        let Some(name) = step.slot_ref() else { continue };
        if step.verb != Verb::Type || data_slots.iter().any(|s| s.slot == name) {
            continue;
        }
        let element_id = ElementId::new(step.target.clone());
        let constraint = constraint_for(site, step.page_or(&target_page), &element_id);
        data_slots.push(DataSlot {
            element_id,
            page: step.page.clone(),
            slot: name.to_string(),
            constraint,
            scenario: Scenario::Valid,
        });
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(TestCase {
        id: id.to_string(),
        name: draft.name.trim().to_string(),
        priority: Priority::parse(&draft.priority).unwrap_or(Priority::Medium),
        description: draft.description.trim().to_string(),
        test_type: TestType::new(&draft.test_type),
        target_page,
        steps,
        expected: draft.expected.clone(),
        data_slots,
    })
}

fn is_absolute_url(text: &str) -> bool {
    url::Url::parse(text).is_ok_and(|u| matches!(u.scheme(), "http" | "https"))
}

fn structural(case: &TestCase, errors: &mut Vec<RejectReason>) {
    let mut push = |detail: String| errors.push(RejectReason::new(RejectKind::Structural, detail));
    if case.name.trim().is_empty() {
        push("empty name".into());
    }
    if case.description.trim().is_empty() {
        push("empty description".into());
    }
    if case.test_type.as_str().is_empty() {
        push("empty test type".into());
    }
    if !is_absolute_url(&case.target_page) {
        push(format!("target page `{}` is not an http(s) URL", case.target_page));
    }
    if case.steps.is_empty() {
        push("no steps".into());
    }
    let slot_names: BTreeSet<&str> = case.data_slots.iter().map(|s| s.slot.as_str()).collect();
    if slot_names.len() != case.data_slots.len() {
        push("duplicate data slot names".into());
    }
    for step in &case.steps {
        let n = step.ordinal;
        if step.verb.takes_url() {
            if !is_absolute_url(&step.target) {
                push(format!("step {n}: {} needs a URL, got `{}`", step.verb, step.target));
            }
        } else if step.verb != Verb::Wait || !step.target.is_empty() {
            if !ElementId::looks_valid(&step.target) {
                push(format!("step {n}: {} needs an element id, got `{}`", step.verb, step.target));
            }
        }
        if step.verb.requires_argument() && step.argument.is_none() {
            push(format!("step {n}: {} needs an argument", step.verb));
        }
        if let Some(slot) = step.slot_ref() {
            if !slot_names.contains(slot) {
                push(format!("step {n}: undeclared slot `{slot}`"));
            }
        }
    }
    for slot in &case.data_slots {
        if !ElementId::looks_valid(slot.element_id.as_str()) {
            push(format!("slot {}: bad element id `{}`", slot.slot, slot.element_id));
        }
        if let Some(other) = slot.scenario.paired_with() {
            if other == slot.slot || !slot_names.contains(other) {
                push(format!("slot {}: pairs with unknown slot `{other}`", slot.slot));
            }
        }
    }
}

fn normalized_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn uniqueness(case: &TestCase, accepted: &[TestCase], errors: &mut Vec<RejectReason>) {
    let name = normalized_name(&case.name);
    let steps: Vec<_> = case.steps.iter().map(TestStep::signature).collect();
    for other in accepted.iter().filter(|o| o.id != case.id) {
        if normalized_name(&other.name) == name {
            errors.push(RejectReason::new(
                RejectKind::Uniqueness,
                format!("name duplicates {} \"{}\"", other.id, other.name),
            ));
        }
        if !steps.is_empty() && other.steps.iter().map(TestStep::signature).eq(steps.iter().copied()) {
            errors.push(RejectReason::new(
                RejectKind::Uniqueness,
                format!("step sequence duplicates {}", other.id),
            ));
        }
    }
}

fn contextual(case: &TestCase, site: &SiteRepresentation, required: &RequiredTypes, errors: &mut Vec<RejectReason>) {
    let mut push = |detail: String| errors.push(RejectReason::new(RejectKind::Contextual, detail));
    if !required.contains(&case.test_type) {
        push(format!("test type `{}` is not required", case.test_type));
    }
    if site.page(&case.target_page).is_none() {
        push(format!("unknown target page {}", case.target_page));
    }
    let mut missing = |page: &str, element: &str, what: String| {
        if site.page(page).is_some() && site.element(page, &ElementId::new(element)).is_none() {
            push(format!("{what}: element {element} not on {page}"));
        } else if site.page(page).is_none() && page != case.target_page {
            push(format!("{what}: unknown page {page}"));
        }
    };
    for step in case.steps.iter().filter(|s| !s.verb.takes_url() && !s.target.is_empty()) {
        missing(step.page_or(&case.target_page), &step.target, format!("step {}", step.ordinal));
    }
    for slot in &case.data_slots {
        let page = slot.page.as_deref().unwrap_or(&case.target_page);
        missing(page, slot.element_id.as_str(), format!("slot {}", slot.slot));
    }
}

/// Every URL a navigate step may target: the base plus the destination of
/// any edge leaving a reachable page.
pub fn navigable_urls(site: &SiteRepresentation) -> BTreeSet<String> {
    let reachable = site.reachable_pages();
    let mut allowed: BTreeSet<String> = site
        .nav_edges
        .iter()
        .filter(|e| reachable.contains(&e.from_url))
        .map(|e| e.to_url.clone())
        .collect();
    allowed.insert(site.base_url.clone());
    allowed
}

fn flow(case: &TestCase, site: &SiteRepresentation, errors: &mut Vec<RejectReason>) {
    let allowed = navigable_urls(site);
    let reachable = site.reachable_pages();
    for step in &case.steps {
        if step.verb == Verb::Navigate {
            if !allowed.contains(&step.target) {
                errors.push(RejectReason::new(
                    RejectKind::Flow,
                    format!("step {}: no navigation edge reaches {}", step.ordinal, step.target),
                ));
            }
        } else if !step.verb.takes_url() && !step.target.is_empty() {
            let page = step.page_or(&case.target_page);
            if site.page(page).is_some() && !reachable.contains(page) {
                errors.push(RejectReason::new(
                    RejectKind::Flow,
                    format!("step {}: page {page} is unreachable from the base page", step.ordinal),
                ));
            }
        }
    }
}

/// Runs the structural, uniqueness, contextual and flow checks in that
/// order and returns every failure.
pub fn validate_case(
    case: &TestCase,
    site: &SiteRepresentation,
    accepted: &[TestCase],
    required: &RequiredTypes,
) -> Result<(), Vec<RejectReason>> {
    let mut errors = Vec::new();
    structural(case, &mut errors);
    uniqueness(case, accepted, &mut errors);
    contextual(case, site, required, &mut errors);
    flow(case, site, &mut errors);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Re-validates every case against the rest of the suite.
pub fn check_suite(
    cases: &[TestCase],
    site: &SiteRepresentation,
    required: &RequiredTypes,
) -> BTreeMap<String, Vec<RejectReason>> {
    cases
        .iter()
        .filter_map(|c| validate_case(c, site, cases, required).err().map(|e| (c.id.clone(), e)))
        .collect()
}

const EXOTIC: &[&str] = &["locked", "problem user", "problem_user", "all fields empty", "rare"];
const NEGATIVE: &[&str] = &[
    "invalid", "empty", "error", "format", "strength", "mismatch", "wrong", "incorrect", "glitch",
];

/// Rule-based priority used when the model's proposal is outside the
/// closed set.
pub fn rule_priority(case: &TestCase, site: &SiteRepresentation, required: &RequiredTypes) -> Priority {
    let text = format!("{} {}", case.name, case.description).to_lowercase();
    let mentions = |words: &[&str]| words.iter().any(|w| text.contains(w));
    if mentions(EXOTIC) {
        Priority::Low
    } else if mentions(NEGATIVE) {
        Priority::Medium
    } else if site.is_primary_flow_target(&case.target_page) && required.contains(&case.test_type) {
        Priority::High
    } else {
        Priority::Medium
    }
}

/// Keeps a proposal in {High, Medium, Low}; anything else is overridden by
/// [`rule_priority`]. Returns the priority and whether it was overridden.
pub fn assign_priority(
    case: &TestCase,
    proposed: &str,
    site: &SiteRepresentation,
    required: &RequiredTypes,
) -> (Priority, bool) {
    match Priority::parse(proposed) {
        Some(p) => (p, false),
        None => (rule_priority(case, site, required), true),
    }
}
