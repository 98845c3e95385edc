//! Phase 5: metrics, failure categories and the human/machine reports.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::canonical::to_canonical_json;
use crate::data::BindingSet;
use crate::estimate_tokens;
use crate::exec::{CaseStatus, RunResult};
use crate::llm::{complete, template_header, Backend, PromptEnvelope, SchemaId};
use crate::site::{render_page, PageType, SiteRepresentation};
use crate::testgen::{Priority, TestSuite};

pub use metrics::{
    categorize_failures, categorize_step, compute_metrics, deciding_step, relevance_proxies, DurationStats,
    ErrorCategory, Metrics, Percent, RelevanceProxies, Tally,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportProfile {
    Hermetic,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRow {
    pub case_id: String,
    pub name: String,
    pub priority: Option<Priority>,
    pub status: CaseStatus,
    pub category: ErrorCategory,
    /// False when no rule matched and the category is the default.
    pub rule_matched: bool,
    /// Ordinal of the deciding step (0 = setup).
    pub step: Option<usize>,
    pub page: Option<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRollup {
    pub url: String,
    pub page_type: PageType,
    pub summary: String,
    pub cases: usize,
    pub passed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub application: String,
    pub suite_digest: String,
    pub session: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub metrics: Metrics,
    pub relevance: RelevanceProxies,
    pub failures: Vec<FailureRow>,
    pub category_counts: BTreeMap<ErrorCategory, usize>,
    /// Failures that fell through to the default category.
    pub uncategorized: usize,
    pub pages: Vec<PageRollup>,
    /// Deterministic narrative; always present.
    pub summary_text: String,
    /// Model-written summary, appended in the llm profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_summary: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
    /// Screenshots and other files the report links to, relative to the
    /// artifact directory.
    pub artifacts: Vec<String>,
}

/// Everything a report is built from; all of it must describe one run.
#[derive(Clone, Copy)]
pub struct ReportInputs<'a> {
    pub suite: &'a TestSuite,
    pub run: &'a RunResult,
    pub site: &'a SiteRepresentation,
    pub bindings: Option<&'a BindingSet>,
}

fn failure_rows(inputs: &ReportInputs<'_>, categories: &BTreeMap<String, ErrorCategory>) -> Vec<FailureRow> {
    categories
        .iter()
        .map(|(id, category)| {
            let case = inputs.suite.cases.iter().find(|c| &c.id == id);
            let step = deciding_step(inputs.run, id);
            let page = case.map(|c| {
                step.and_then(|s| c.steps.get(s.ordinal.wrapping_sub(1)))
                    .map_or(c.target_page.clone(), |s| s.page_or(&c.target_page).to_string())
            });
            FailureRow {
                case_id: id.clone(),
                name: case.map_or_else(String::new, |c| c.name.clone()),
                priority: case.map(|c| c.priority),
                status: inputs.run.case_status[id],
                category: *category,
                rule_matched: step.is_some_and(|s| categorize_step(s).1),
                step: step.map(|s| s.ordinal),
                page,
                message: step.map_or_else(|| "no failing step recorded".into(), |s| s.message.clone()),
                screenshot_ref: step.and_then(|s| s.screenshot_ref.clone()),
            }
        })
        .collect()
}

fn page_rollup(inputs: &ReportInputs<'_>) -> Vec<PageRollup> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for case in &inputs.suite.cases {
        let Some(status) = inputs.run.case_status.get(&case.id) else {
            continue;
        };
        let entry = counts.entry(case.target_page.as_str()).or_default();
        entry.0 += 1;
        entry.1 += usize::from(*status == CaseStatus::Passed);
    }
    counts
        .into_iter()
        .filter_map(|(url, (cases, passed))| {
            let page = inputs.site.page(url)?;
            Some(PageRollup {
                url: url.to_string(),
                page_type: page.page_type,
                summary: page.summary.clone(),
                cases,
                passed,
            })
        })
        .collect()
}

fn opt(p: Option<Percent>) -> String {
    p.map_or_else(|| "n/a".into(), |p| format!("{p}%"))
}

/// The deterministic narrative. Every number in it is a [`Metrics`] field or
/// a category count.
fn narrative(app: &str, m: &Metrics, counts: &BTreeMap<ErrorCategory, usize>, pages: &[PageRollup]) -> String {
    let mut out = String::new();
    if m.total_cases == 0 {
        let _ = writeln!(out, "{app}: zero test cases were executed.");
        return out;
    }
    let _ = writeln!(
        out,
        "{app}: {} of {} passed ({}), {} failed, {} errored.",
        m.passed,
        m.total_cases,
        opt(m.success_rate_percent),
        m.failed,
        m.errored
    );
    let _ = writeln!(
        out,
        "Executed cases touched {} of {} pages ({}).",
        m.pages_covered,
        m.pages_total,
        opt(m.coverage_percent)
    );
    if counts.is_empty() {
        let _ = writeln!(out, "No failures to categorize.");
    } else {
        let parts: Vec<String> = counts.iter().map(|(c, n)| format!("{c} {n}")).collect();
        let _ = writeln!(out, "Failures by category: {}.", parts.join(", "));
    }
    for page in pages {
        let _ = writeln!(
            out,
            "- {} [{}] {}: {} of {} passed.",
            page.url, page.page_type, page.summary, page.passed, page.cases
        );
    }
    out
}

/// Result digest plus the representation of the pages where cases failed,
/// as far as the backend's window allows.
pub fn summary_prompt(report: &Report, site: &SiteRepresentation, context_limit: usize) -> PromptEnvelope {
    let mut text = template_header("report_summary.v1");
    text.push_str(
        "\nWrite a short plain-language summary of this test run for a product team. \
         Name the pages and elements involved in failures and suggest what to check first.\n\n",
    );
    let m = &report.metrics;
    let _ = writeln!(text, "APPLICATION {}", report.application);
    let _ = writeln!(
        text,
        "TOTALS {} of {} passed ({}), {} failed, {} errored",
        m.passed,
        m.total_cases,
        opt(m.success_rate_percent),
        m.failed,
        m.errored
    );
    for f in &report.failures {
        let _ = writeln!(
            text,
            "FAILED {} \"{}\" [{}] on {}: {}",
            f.case_id,
            f.name,
            f.category,
            f.page.as_deref().unwrap_or("?"),
            f.message
        );
    }
    let mut refs = vec![report.suite_digest.clone()];
    let pages: BTreeSet<&str> = report.failures.iter().filter_map(|f| f.page.as_deref()).collect();
    for url in pages {
        let Some(rendered) = render_page(site, url) else { continue };
        // keep half the window for the system text and the reply
        if estimate_tokens(&text) + estimate_tokens(&rendered) > context_limit / 2 {
            break;
        }
        text.push_str("\nSITE CONTEXT\n");
        text.push_str(&rendered);
        refs.push(url.to_string());
    }
    PromptEnvelope::new("report_summary.v1", text, refs, SchemaId::FreeText)
}

pub fn render_report(
    metrics: &Metrics,
    categories: &BTreeMap<String, ErrorCategory>,
    inputs: ReportInputs<'_>,
    profile: ReportProfile,
    backend: Option<&dyn Backend>,
) -> Report {
    let failures = failure_rows(&inputs, categories);
    let mut category_counts = BTreeMap::new();
    for f in &failures {
        *category_counts.entry(f.category).or_insert(0) += 1;
    }
    let pages = page_rollup(&inputs);
    let summary_text = narrative(&inputs.suite.application, metrics, &category_counts, &pages);
    let artifacts = failures.iter().filter_map(|f| f.screenshot_ref.clone()).collect();
    let mut report = Report {
        application: inputs.suite.application.clone(),
        suite_digest: inputs.run.suite_digest.clone(),
        session: inputs.run.environment.session.clone(),
        started_at: inputs.run.started_at,
        finished_at: inputs.run.finished_at,
        metrics: metrics.clone(),
        relevance: relevance_proxies(inputs.suite, inputs.run, inputs.bindings),
        uncategorized: failures.iter().filter(|f| !f.rule_matched).count(),
        failures,
        category_counts,
        pages,
        summary_text,
        llm_summary: None,
        notices: Vec::new(),
        artifacts,
    };
    if profile == ReportProfile::Llm {
        match backend {
            None => report.notices.push("LLM summary skipped: no backend configured".into()),
            Some(backend) => {
                let prompt = summary_prompt(&report, inputs.site, backend.context_limit());
                match complete(&prompt, backend) {
                    Ok(reply) => report.llm_summary = reply.parsed.and_then(|v| v.as_str().map(str::to_string)),
                    Err(e) => report.notices.push(format!("LLM summary unavailable: {e}")),
                }
            }
        }
    }
    report
}

impl Report {
    pub fn to_json(&self) -> String {
        to_canonical_json(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let m = &self.metrics;
        let mut out = String::new();
        let _ = writeln!(out, "# Test report: {}\n", self.application);
        let _ = writeln!(out, "Session `{}`, suite `{}`.\n", self.session, &self.suite_digest[..self.suite_digest.len().min(12)]);
        let _ = writeln!(out, "## Summary\n\n{}", self.summary_text);

        let _ = writeln!(out, "## Execution success rate\n");
        let _ = writeln!(out, "| Application | Total Test Cases | Passed Test Cases | Failed Test Cases | Errored Test Cases | Success Rate (%) |");
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |\n",
            self.application,
            m.total_cases,
            m.passed,
            m.failed,
            m.errored,
            m.success_rate_percent.map_or_else(|| "n/a".into(), |p| p.to_string())
        );

        let r = &self.relevance;
        let _ = writeln!(out, "## Relevance measurements\n");
        let _ = writeln!(out, "| Criteria | {} |", self.application);
        let _ = writeln!(out, "|---|---|");
        let _ = writeln!(out, "| Test Case Execution Success Rate | {} |", opt(m.success_rate_percent));
        let _ = writeln!(out, "| Instruction Relevance (cases of instruction-derived types) | {} |", opt(r.instruction));
        let _ = writeln!(out, "| Web Application Relevance (element steps resolved) | {} |", opt(r.application));
        let _ = writeln!(out, "| Data Mappings Relevance (provided values passing constraints) | {} |", opt(r.data_mapping));
        let _ = writeln!(out, "| Synthetic Data Contextuality (values behaving per scenario) | {} |\n", opt(r.synthetic_data));

        if !m.per_priority.is_empty() {
            let _ = writeln!(out, "## By priority\n");
            let _ = writeln!(out, "| Priority | Total | Passed | Failed | Errored |");
            let _ = writeln!(out, "|---|---|---|---|---|");
            for (p, t) in &m.per_priority {
                let _ = writeln!(out, "| {p} | {} | {} | {} | {} |", t.total, t.passed, t.failed, t.errored);
            }
            out.push('\n');
        }

        let _ = writeln!(out, "## Failures\n");
        if self.failures.is_empty() {
            let _ = writeln!(out, "None.\n");
        } else {
            let _ = writeln!(out, "| Case | Name | Priority | Category | Step | Message | Screenshot |");
            let _ = writeln!(out, "|---|---|---|---|---|---|---|");
            for f in &self.failures {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    f.case_id,
                    f.name,
                    f.priority.map_or("", Priority::as_str),
                    f.category,
                    f.step.map_or_else(String::new, |s| s.to_string()),
                    f.message.replace('|', "\\|"),
                    f.screenshot_ref.as_deref().map_or_else(String::new, |s| format!("[png]({s})"))
                );
            }
            if self.uncategorized > 0 {
                let _ = writeln!(out, "\n{} failure(s) matched no rule and default to `assertion`.", self.uncategorized);
            }
            out.push('\n');
        }

        let d = &m.durations;
        let _ = writeln!(out, "## Step durations\n");
        let _ = writeln!(
            out,
            "{} executed steps, {} ms total; mean {} ms, p50 {} ms, p95 {} ms, max {} ms.\n",
            d.steps, d.total_ms, d.mean_ms, d.p50_ms, d.p95_ms, d.max_ms
        );

        if let Some(summary) = &self.llm_summary {
            let _ = writeln!(out, "## Model summary\n\n{}\n", summary.trim());
        }
        if !self.notices.is_empty() {
            let _ = writeln!(out, "## Notices\n");
            for n in &self.notices {
                let _ = writeln!(out, "- {n}");
            }
            out.push('\n');
        }
        out
    }

    /// Writes `report.md` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        std::fs::write(dir.join("report.json"), self.to_json())
    }
}
