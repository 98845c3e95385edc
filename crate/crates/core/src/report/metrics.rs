use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{BindingSet, BindingSource, Scenario};
use crate::exec::{CaseStatus, RunResult, StepOutcome, StepStatus};
use crate::site::SiteRepresentation;
use crate::testgen::{Priority, TestSuite, Verb};

/// A percentage held in hundredths, rounded half-up, written as `"90.00"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Percent(u64);

impl Percent {
    /// `100 × part / whole`, half-up to two decimals; `None` for an empty whole.
    pub fn of(part: usize, whole: usize) -> Option<Percent> {
        (whole > 0).then(|| {
            let (part, whole) = (part as u128, whole as u128);
            Percent(((part * 20_000 + whole) / (2 * whole)) as u64)
        })
    }

    pub fn hundredths(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let bad = || serde::de::Error::custom(format!("`{text}` is not a two-decimal percentage"));
        let (whole, frac) = text.split_once('.').ok_or_else(bad)?;
        if frac.len() != 2 {
            return Err(bad());
        }
        let whole: u64 = whole.parse().map_err(|_| bad())?;
        let frac: u64 = frac.parse().map_err(|_| bad())?;
        Ok(Percent(whole * 100 + frac))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
}

impl Tally {
    fn add(&mut self, status: CaseStatus) {
        self.total += 1;
        match status {
            CaseStatus::Passed => self.passed += 1,
            CaseStatus::Failed => self.failed += 1,
            CaseStatus::Error => self.errored += 1,
        }
    }
}

/// Over executed (non-skipped) steps, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DurationStats {
    pub steps: usize,
    pub total_ms: u64,
    /// Half-up to whole milliseconds.
    pub mean_ms: u64,
    /// Nearest-rank percentiles.
    pub p50_ms: u64,
    pub p95_ms: u64,
    pub max_ms: u64,
}

impl DurationStats {
    fn of(outcomes: &[&StepOutcome]) -> Self {
        let mut ms: Vec<u64> = outcomes
            .iter()
            .filter(|o| o.status != StepStatus::Skipped)
            .map(|o| o.duration_ms)
            .collect();
        if ms.is_empty() {
            return Self::default();
        }
        ms.sort_unstable();
        let n = ms.len() as u64;
        let total: u64 = ms.iter().sum();
        let rank = |p: u64| ms[((p * n).div_ceil(100).max(1) - 1) as usize];
        Self {
            steps: ms.len(),
            total_ms: total,
            mean_ms: (2 * total + n) / (2 * n),
            p50_ms: rank(50),
            p95_ms: rank(95),
            max_ms: *ms.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub total_cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
    /// Absent when nothing ran.
    pub success_rate_percent: Option<Percent>,
    /// Distinct target pages of executed cases.
    pub pages_covered: usize,
    pub pages_total: usize,
    pub coverage_percent: Option<Percent>,
    pub per_priority: BTreeMap<Priority, Tally>,
    pub durations: DurationStats,
}

impl Metrics {
    /// Only the success-rate arithmetic, for callers that have counts but no run.
    pub fn from_counts(total: usize, passed: usize) -> Metrics {
        assert!(passed <= total, "passed {passed} exceeds total {total}");
        Metrics {
            total_cases: total,
            passed,
            failed: total - passed,
            errored: 0,
            success_rate_percent: Percent::of(passed, total),
            pages_covered: 0,
            pages_total: 0,
            coverage_percent: None,
            per_priority: BTreeMap::new(),
            durations: DurationStats::default(),
        }
    }
}

pub fn compute_metrics(run: &RunResult, suite: &TestSuite, site: &SiteRepresentation) -> Metrics {
    let mut overall = Tally::default();
    let mut per_priority: BTreeMap<Priority, Tally> = BTreeMap::new();
    let mut pages = BTreeSet::new();
    for (id, status) in &run.case_status {
        overall.add(*status);
        let case = suite.cases.iter().find(|c| &c.id == id);
        if let Some(case) = case {
            per_priority.entry(case.priority).or_default().add(*status);
            if site.pages.contains_key(&case.target_page) {
                pages.insert(case.target_page.as_str());
            }
        }
    }
    let outcomes: Vec<&StepOutcome> = run.outcomes.iter().collect();
    Metrics {
        total_cases: overall.total,
        passed: overall.passed,
        failed: overall.failed,
        errored: overall.errored,
        success_rate_percent: Percent::of(overall.passed, overall.total),
        pages_covered: pages.len(),
        pages_total: site.pages.len(),
        coverage_percent: Percent::of(pages.len(), site.pages.len()),
        per_priority,
        durations: DurationStats::of(&outcomes),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    UiElement,
    Timeout,
    Assertion,
    Server,
    Data,
    Session,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::UiElement,
        ErrorCategory::Timeout,
        ErrorCategory::Assertion,
        ErrorCategory::Server,
        ErrorCategory::Data,
        ErrorCategory::Session,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::UiElement => "ui_element",
            ErrorCategory::Timeout => "timeout",
            ErrorCategory::Assertion => "assertion",
            ErrorCategory::Server => "server",
            ErrorCategory::Data => "data",
            ErrorCategory::Session => "session",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rules in the order they are tried; the first match wins.
const RULES: [(ErrorCategory, &[&str]); 5] = [
    (ErrorCategory::Session, &["session lost", "invalid session"]),
    (ErrorCategory::Timeout, &["timeout", "timed out"]),
    (ErrorCategory::UiElement, &["element not found", "not interactable", "no such element", "intercepted"]),
    (ErrorCategory::Server, &["server error", "http 5"]),
    (ErrorCategory::Data, &["slot", "constraint", "test data"]),
];

/// Category of one failed step, and whether a rule matched it (as opposed
/// to falling through to `assertion`).
pub fn categorize_step(outcome: &StepOutcome) -> (ErrorCategory, bool) {
    let message = outcome.message.to_lowercase();
    for (category, needles) in RULES {
        if needles.iter().any(|n| message.contains(n)) {
            return (category, true);
        }
    }
    let asserted = outcome.verb.is_some_and(Verb::is_assertion) || message.starts_with("assertion failed");
    (ErrorCategory::Assertion, asserted)
}

/// The step that decided a non-passed case: its first failed or errored step.
pub fn deciding_step<'a>(run: &'a RunResult, case_id: &'a str) -> Option<&'a StepOutcome> {
    run.outcomes_for(case_id)
        .find(|o| matches!(o.status, StepStatus::Failed | StepStatus::Error))
}

pub fn categorize_failures(run: &RunResult) -> BTreeMap<String, ErrorCategory> {
    run.case_status
        .iter()
        .filter(|(_, s)| **s != CaseStatus::Passed)
        .map(|(id, _)| {
            let category = deciding_step(run, id).map_or(ErrorCategory::Assertion, |o| categorize_step(o).0);
            (id.clone(), category)
        })
        .collect()
}

/// Measurable stand-ins for the qualitative relevance ratings: each is a
/// share, absent when there is nothing to measure.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelevanceProxies {
    /// Cases whose test type was asked for by the instruction (A).
    pub instruction: Option<Percent>,
    /// Executed element steps whose locator resolved on the live page.
    pub application: Option<Percent>,
    /// Dataset-provided values that satisfy their slot constraint.
    pub data_mapping: Option<Percent>,
    /// Synthesized values that behave as their scenario intends.
    pub synthetic_data: Option<Percent>,
}

pub fn relevance_proxies(suite: &TestSuite, run: &RunResult, bindings: Option<&BindingSet>) -> RelevanceProxies {
    let extracted = &suite.required_types.extracted;
    let instruction = (!extracted.is_empty())
        .then(|| {
            let hits = suite.cases.iter().filter(|c| extracted.contains(&c.test_type)).count();
            Percent::of(hits, suite.cases.len())
        })
        .flatten();

    let element_steps: Vec<&StepOutcome> = run
        .outcomes
        .iter()
        .filter(|o| o.status != StepStatus::Skipped && o.verb.is_some_and(|v| !v.takes_url() && v != Verb::Wait))
        .collect();
    let resolved = element_steps
        .iter()
        .filter(|o| o.status == StepStatus::Passed || categorize_step(o).0 != ErrorCategory::UiElement)
        .count();

    let (mut provided, mut provided_ok, mut synthetic, mut synthetic_ok) = (0, 0, 0, 0);
    for b in bindings.map(|b| b.bindings.as_slice()).unwrap_or_default() {
        match b.source {
            BindingSource::Provided => {
                provided += 1;
                provided_ok += usize::from(b.constraint_checked);
            }
            BindingSource::Synthetic => {
                synthetic += 1;
                let behaves = match &b.scenario {
                    Scenario::Invalid(_) => !b.constraint_checked && b.violated_rule.is_some(),
                    Scenario::Empty => b.value.is_empty(),
                    Scenario::Valid | Scenario::MaxLength | Scenario::UnicodeName | Scenario::Match(_) | Scenario::Mismatch(_) => {
                        b.constraint_checked
                    }
                };
                synthetic_ok += usize::from(behaves);
            }
        }
    }

    RelevanceProxies {
        instruction,
        application: Percent::of(resolved, element_steps.len()),
        data_mapping: Percent::of(provided_ok, provided),
        synthetic_data: Percent::of(synthetic_ok, synthetic),
    }
}
