//! Phase 4, part two: interpret steps into commands and run them against a
//! session.

mod session;
mod simulated;
mod webdriver;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::canonical::{sha256_hex, to_canonical_json};
use crate::dom::{ElementId, Geometry};
use crate::site::SiteRepresentation;
use crate::testgen::{TestCase, TestSuite, Verb};
pub use session::{HttpRequest, HttpResponse, HttpTransport, Method, Session, StepError, Transport};
pub use simulated::{SimulatedSession, SIMULATED_EPOCH};
pub use webdriver::{WebDriverConfig, WebDriverSession};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_SLOW_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub default_timeout_ms: u64,
    /// Applied to steps on `slow_pages`.
    pub slow_timeout_ms: u64,
    pub slow_pages: BTreeSet<String>,
    /// Navigate to the base URL before each case (instead of relying on
    /// whatever state the previous case left).
    pub fresh_navigation: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            default_timeout_ms: DEFAULT_TIMEOUT_MS,
            slow_timeout_ms: DEFAULT_SLOW_TIMEOUT_MS,
            slow_pages: BTreeSet::new(),
            fresh_navigation: true,
        }
    }
}

impl ExecConfig {
    pub fn timeout_for(&self, page: &str) -> u64 {
        if self.slow_pages.contains(page) {
            self.slow_timeout_ms
        } else {
            self.default_timeout_ms
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("case {case}: slot `{slot}` has no binding")]
    UnboundSlot { case: String, slot: String },
    #[error("case {case}: element {element} is not on {page}")]
    UnknownElement { case: String, page: String, element: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCommand {
    pub verb: Verb,
    /// CSS selector; absent for URL verbs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_locator: Option<String>,
    /// URL, text to type, option to select, expected text or wait time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    pub timeout_ms: u64,
    /// Page the step expects to act on.
    pub page: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_id: Option<ElementId>,
}

/// One command per step, with slot references replaced by their bound
/// values and element ids by their page locators.
pub fn interpret(
    case: &TestCase,
    bindings: &BTreeMap<String, String>,
    site: &SiteRepresentation,
    config: &ExecConfig,
) -> Result<Vec<ActionCommand>, ExecError> {
    let mut commands = Vec::with_capacity(case.steps.len());
    for step in &case.steps {
        let argument = match step.slot_ref() {
            Some(slot) => Some(bindings.get(slot).cloned().ok_or_else(|| ExecError::UnboundSlot {
                case: case.id.clone(),
                slot: slot.to_string(),
            })?),
            None => step.argument.clone(),
        };
        let command = if step.verb.takes_url() {
            ActionCommand {
                verb: step.verb,
                resolved_locator: None,
                payload: Some(step.target.clone()),
                timeout_ms: config.timeout_for(&step.target),
                page: step.target.clone(),
                element_id: None,
            }
        } else if step.verb == Verb::Wait && step.target.is_empty() {
            ActionCommand {
                verb: Verb::Wait,
                resolved_locator: None,
                payload: argument,
                timeout_ms: config.timeout_for(&case.target_page),
                page: case.target_page.clone(),
                element_id: None,
            }
        } else {
            let page = step.page_or(&case.target_page);
            let element = ElementId::new(step.target.clone());
            let digest = site.element(page, &element).ok_or_else(|| ExecError::UnknownElement {
                case: case.id.clone(),
                page: page.to_string(),
                element: step.target.clone(),
            })?;
            ActionCommand {
                verb: step.verb,
                resolved_locator: Some(digest.locator.clone()),
                payload: argument,
                timeout_ms: config.timeout_for(page),
                page: page.to_string(),
                element_id: Some(element),
            }
        };
        commands.push(command);
    }
    Ok(commands)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Passed,
    Failed,
    Error,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub case_id: String,
    /// 0 is the per-case setup (fresh navigation); steps count from 1.
    pub ordinal: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb: Option<Verb>,
    pub status: StepStatus,
    pub message: String,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_ref: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Passed,
    Failed,
    Error,
}

impl CaseStatus {
    pub fn of(outcomes: &[&StepOutcome]) -> CaseStatus {
        if outcomes.iter().any(|o| o.status == StepStatus::Error) {
            CaseStatus::Error
        } else if outcomes.iter().all(|o| o.status == StepStatus::Passed) {
            CaseStatus::Passed
        } else {
            CaseStatus::Failed
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEnvironment {
    pub session: String,
    pub base_url: String,
    pub default_timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub application: String,
    /// SHA-256 of the canonical suite JSON the run executed.
    pub suite_digest: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub outcomes: Vec<StepOutcome>,
    /// In suite order of execution; ids sort the same way.
    pub case_status: BTreeMap<String, CaseStatus>,
    pub environment: RunEnvironment,
    /// Element boxes observed while running: page → element → box.
    pub geometry: BTreeMap<String, BTreeMap<ElementId, Geometry>>,
}

impl RunResult {
    pub fn outcomes_for<'a>(&'a self, case_id: &'a str) -> impl Iterator<Item = &'a StepOutcome> + 'a {
        self.outcomes.iter().filter(move |o| o.case_id == case_id)
    }

    pub fn count(&self, status: CaseStatus) -> usize {
        self.case_status.values().filter(|s| **s == status).count()
    }

    /// Status algebra and timing identities.
    pub fn check_consistency(&self) -> Result<(), String> {
        if self.finished_at < self.started_at {
            return Err("finished before it started".into());
        }
        let wall = (self.finished_at - self.started_at).num_milliseconds().max(0) as u64;
        let total: u64 = self.outcomes.iter().map(|o| o.duration_ms).sum();
        if total > wall {
            return Err(format!("step durations {total} ms exceed wall time {wall} ms"));
        }
        for (case, status) in &self.case_status {
            let outcomes: Vec<&StepOutcome> = self.outcomes_for(case).collect();
            if CaseStatus::of(&outcomes) != *status {
                return Err(format!("{case}: status {status:?} disagrees with its steps"));
            }
            let mut stopped = false;
            for o in &outcomes {
                match o.status {
                    StepStatus::Skipped if !stopped => return Err(format!("{case}: skip before any failure")),
                    StepStatus::Failed | StepStatus::Error => {
                        if o.message.is_empty() {
                            return Err(format!("{case}: failure without message"));
                        }
                        stopped = true;
                    }
                    StepStatus::Passed if stopped => return Err(format!("{case}: step ran after a failure")),
                    _ => {}
                }
            }
        }
        if self.outcomes.iter().any(|o| !self.case_status.contains_key(&o.case_id)) {
            return Err("outcome for a case without status".into());
        }
        Ok(())
    }
}

fn elapsed_ms(from: DateTime<Utc>, to: DateTime<Utc>) -> u64 {
    (to - from).num_milliseconds().max(0) as u64
}

fn outcome(case: &str, ordinal: usize, verb: Option<Verb>, status: StepStatus, message: String, duration_ms: u64) -> StepOutcome {
    StepOutcome { case_id: case.to_string(), ordinal, verb, status, message, duration_ms, screenshot_ref: None }
}

fn failure_status(error: &StepError) -> StepStatus {
    if error.is_error() {
        StepStatus::Error
    } else {
        StepStatus::Failed
    }
}

/// Runs cases in suite order. Each case starts from a reset session and,
/// when configured, a fresh navigation to the base URL. The first failed or
/// errored step ends its case; the rest are recorded as skipped. A lost
/// session ends the run and marks every remaining case as errored.
pub fn run_suite(
    suite: &TestSuite,
    commands: &BTreeMap<String, Vec<ActionCommand>>,
    session: &mut dyn Session,
    config: &ExecConfig,
    artifacts: Option<&Path>,
) -> RunResult {
    let started_at = session.now();
    let mut outcomes = Vec::new();
    let mut case_status = BTreeMap::new();
    let mut geometry: BTreeMap<String, BTreeMap<ElementId, Geometry>> = BTreeMap::new();
    let mut lost: Option<String> = None;
    let empty = Vec::new();

    for case in &suite.cases {
        let steps = commands.get(&case.id).unwrap_or(&empty);
        let mut case_outcomes = Vec::new();
        if let Some(reason) = &lost {
            case_outcomes.push(outcome(&case.id, 0, None, StepStatus::Error, format!("session lost: {reason}"), 0));
            case_outcomes.extend(steps.iter().enumerate().map(|(i, c)| {
                outcome(&case.id, i + 1, Some(c.verb), StepStatus::Skipped, "skipped: session lost".into(), 0)
            }));
        } else {
            let t0 = session.now();
            let setup = session.reset().and_then(|()| {
                if config.fresh_navigation {
                    session.execute(&ActionCommand {
                        verb: Verb::Navigate,
                        resolved_locator: None,
                        payload: Some(suite.base_url.clone()),
                        timeout_ms: config.timeout_for(&suite.base_url),
                        page: suite.base_url.clone(),
                        element_id: None,
                    })
                } else {
                    Ok(())
                }
            });
            let mut stopped_at = None;
            if let Err(e) = setup {
                if let StepError::SessionLost(reason) = &e {
                    lost = Some(reason.clone());
                }
                let duration = elapsed_ms(t0, session.now());
                case_outcomes.push(outcome(&case.id, 0, None, failure_status(&e), format!("setup: {e}"), duration));
                stopped_at = Some(0);
            }
            for (i, command) in steps.iter().enumerate() {
                let ordinal = i + 1;
                if let Some(at) = stopped_at {
                    case_outcomes.push(outcome(
                        &case.id,
                        ordinal,
                        Some(command.verb),
                        StepStatus::Skipped,
                        format!("skipped after step {at}"),
                        0,
                    ));
                    continue;
                }
                let t0 = session.now();
                let result = session.execute(command);
                let duration = elapsed_ms(t0, session.now());
                match result {
                    Ok(()) => {
                        if let (Some(locator), Some(element)) = (&command.resolved_locator, &command.element_id) {
                            if let Some(rect) = session.geometry(locator) {
                                geometry.entry(command.page.clone()).or_default().insert(element.clone(), rect);
                            }
                        }
                        case_outcomes.push(outcome(&case.id, ordinal, Some(command.verb), StepStatus::Passed, String::new(), duration));
                    }
                    Err(e) => {
                        let mut failed = outcome(&case.id, ordinal, Some(command.verb), failure_status(&e), e.to_string(), duration);
                        if session.is_live() {
                            failed.screenshot_ref = save_screenshot(session, artifacts, &case.id, ordinal);
                        }
                        if let StepError::SessionLost(reason) = &e {
                            lost = Some(reason.clone());
                        }
                        case_outcomes.push(failed);
                        stopped_at = Some(ordinal);
                    }
                }
            }
        }
        let refs: Vec<&StepOutcome> = case_outcomes.iter().collect();
        case_status.insert(case.id.clone(), CaseStatus::of(&refs));
        outcomes.extend(case_outcomes);
    }

    let finished_at = session.now();
    RunResult {
        application: suite.application.clone(),
        suite_digest: sha256_hex(to_canonical_json(suite).expect("suite serializes")),
        started_at,
        finished_at,
        outcomes,
        case_status,
        environment: RunEnvironment {
            session: session.describe(),
            base_url: suite.base_url.clone(),
            default_timeout_ms: config.default_timeout_ms,
        },
        geometry,
    }
}

fn save_screenshot(session: &mut dyn Session, artifacts: Option<&Path>, case: &str, ordinal: usize) -> Option<String> {
    let dir = artifacts?;
    let png = session.screenshot()?;
    let relative = format!("screenshots/{case}-{ordinal:02}.png");
    let path = dir.join(&relative);
    std::fs::create_dir_all(path.parent()?).ok()?;
    match std::fs::write(&path, png) {
        Ok(()) => Some(relative),
        Err(e) => {
            log::warn!("screenshot {}: {e}", path.display());
            None
        }
    }
}

#[cfg(test)]
mod tests;
