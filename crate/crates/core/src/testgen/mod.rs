//! Phase 3: required types, page-by-page generation prompts, validation and
//! the prioritized suite.

mod required;
mod types;
mod validate;

use std::collections::BTreeMap;

use serde_json::Value;

use crate::llm::{complete, template_header, Backend, LlmError, PromptEnvelope, SchemaId};
use crate::site::{Chunk, SiteRepresentation};
pub use required::{
    derive_required_types, derive_with_predefined, extract_types, minimum_cases, LEXICON, LEXICON_VERSION,
};
pub use types::{
    case_id, DataSlot, Priority, Provenance, RejectedCase, RequiredTypes, TestCase, TestStep, TestSuite, TestType,
    Verb, SLOT_PREFIX,
};
pub use validate::{
    assign_priority, case_from_draft, check_suite, navigable_urls, rule_priority, validate_case, CaseDraft,
    RejectKind, RejectReason, SlotDraft, StepDraft,
};

#[derive(Debug, thiserror::Error)]
pub enum TestGenError {
    #[error("generation exhausted{}: {reason}", page.as_ref().map(|p| format!(" on {p}")).unwrap_or_default())]
    GenerationExhausted { page: Option<String>, reason: String },
    #[error("instruction asks for at least {minimum} cases, {produced} accepted")]
    BelowMinimum {
        minimum: usize,
        produced: usize,
        suite: Box<TestSuite>,
    },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

const GENERATION_RULES: &str = "\
You write functional test cases for one page of a web application at a time.
Reply with JSON only:
{\"cases\": [{\"name\": str, \"priority\": \"High\"|\"Medium\"|\"Low\", \"description\": str,
  \"test_type\": str, \"target_page\": url,
  \"steps\": [{\"verb\": str, \"target\": str, \"argument\": str?, \"page\": url?}],
  \"expected\": [str],
  \"data_slots\": [{\"element_id\": str, \"slot\": str, \"scenario\": str?, \"page\": url?}]}]}
Verbs: navigate, click, type, clear, select, assert_text, assert_visible, assert_url, wait.
navigate and assert_url take URLs; every other verb takes an element id from the listing.
`page` names the page holding the element when it differs from target_page.
Write `slot:<name>` as a type argument to request generated or provided test data.
Slot scenarios: valid, invalid, invalid:<rule>, empty, max_length, unicode_name, match:<slot>, mismatch:<slot>.
Use only the required test types. Do not repeat accepted cases.
Pick priority from the page type and navigation priority.
";

struct Context<'a> {
    site: &'a SiteRepresentation,
    application: &'a str,
    instruction: &'a str,
    required: &'a RequiredTypes,
}

fn prompt_body(ctx: &Context<'_>, chunk: &Chunk, accepted: &[TestCase]) -> String {
    let mut text = String::new();
    text.push_str(&format!("APPLICATION {}\n", ctx.application));
    text.push_str(&format!("INSTRUCTION {}\n", ctx.instruction.trim()));
    let types: Vec<&str> = ctx.required.required.iter().map(TestType::as_str).collect();
    text.push_str(&format!("REQUIRED TYPES {}\n", types.join(", ")));
    text.push_str("URL PATTERNS\n");
    if ctx.site.patterns.is_empty() {
        text.push_str("(none)\n");
    }
    for pattern in &ctx.site.patterns {
        text.push_str(&format!("- {} ({} pages)\n", pattern.template, pattern.member_urls.len()));
    }
    text.push_str("ACCEPTED CASES\n");
    if accepted.is_empty() {
        text.push_str("(none)\n");
    }
    for case in accepted {
        text.push_str(&format!("- {} {}\n", case.id, case.name));
    }
    text.push_str(&format!("TARGET PAGE {}\n", chunk.scope.page_url));
    text.push_str(&format!("CHUNK {}\n", chunk.chunk_id));
    text.push_str(&chunk.rendered_text);
    if !chunk.rendered_text.ends_with('\n') {
        text.push('\n');
    }
    text
}

fn refs(chunk: &Chunk, accepted: &[TestCase]) -> Vec<String> {
    std::iter::once(chunk.chunk_id.clone())
        .chain(accepted.iter().map(|c| c.id.clone()))
        .collect()
}

pub fn generation_prompt(
    site: &SiteRepresentation,
    application: &str,
    instruction: &str,
    required: &RequiredTypes,
    chunk: &Chunk,
    accepted: &[TestCase],
) -> PromptEnvelope {
    let ctx = Context { site, application, instruction, required };
    let text = format!(
        "{}\n{GENERATION_RULES}\n{}",
        template_header("testgen.v1"),
        prompt_body(&ctx, chunk, accepted)
    );
    PromptEnvelope::new("testgen.v1", text, refs(chunk, accepted), SchemaId::TestCaseBatch)
}

/// The single refinement round: the page context again plus why the
/// previous proposals were rejected.
pub fn refinement_prompt(
    site: &SiteRepresentation,
    application: &str,
    instruction: &str,
    required: &RequiredTypes,
    chunk: &Chunk,
    accepted: &[TestCase],
    rejections: &[(String, Vec<String>)],
) -> PromptEnvelope {
    let ctx = Context { site, application, instruction, required };
    let mut text = format!("{}\n{GENERATION_RULES}", template_header("testgen.refine.v1"));
    text.push_str("Some proposed cases were rejected. Return corrected replacements for them only.\nREJECTED\n");
    for (name, reasons) in rejections {
        text.push_str(&format!("- \"{name}\": {}\n", reasons.join("; ")));
    }
    text.push('\n');
    text.push_str(&prompt_body(&ctx, chunk, accepted));
    PromptEnvelope::new("testgen.refine.v1", text, refs(chunk, accepted), SchemaId::TestCaseBatch)
}

/// Drafts in a reply, or why the reply was unusable. Items that do not
/// deserialize come back as named rejections.
fn drafts_of(parsed: &Value) -> (Vec<CaseDraft>, Vec<(String, Vec<String>)>) {
    let mut drafts = Vec::new();
    let mut broken = Vec::new();
    for (i, item) in parsed.get("cases").and_then(Value::as_array).into_iter().flatten().enumerate() {
        match serde_json::from_value::<CaseDraft>(item.clone()) {
            Ok(d) => drafts.push(d),
            Err(e) => {
                let name = item.get("name").and_then(Value::as_str).map_or_else(|| format!("cases[{i}]"), str::to_string);
                broken.push((name, vec![format!("structural: {e}")]));
            }
        }
    }
    (drafts, broken)
}

struct Builder<'a> {
    ctx: Context<'a>,
    cases: Vec<TestCase>,
    provenance: BTreeMap<String, Provenance>,
    rejected: Vec<RejectedCase>,
    overrides: usize,
}

struct Round {
    proposed: usize,
    accepted: usize,
    rejections: Vec<(String, Vec<String>)>,
}

impl Builder<'_> {
    fn run_round(
        &mut self,
        backend: &dyn Backend,
        envelope: &PromptEnvelope,
        chunk: &Chunk,
        refined: bool,
    ) -> Result<Round, LlmError> {
        let parsed = match complete(envelope, backend) {
            Ok(reply) => reply.parsed.ok_or_else(|| "structural: reply carried no JSON".to_string()),
            Err(LlmError::SchemaFailure { reason, .. }) => Err(format!("structural: reply failed the schema: {reason}")),
            Err(e) => return Err(e),
        };
        let mut round = Round { proposed: 0, accepted: 0, rejections: Vec::new() };
        let parsed = match parsed {
            Ok(v) => v,
            Err(reason) => {
                round.proposed = 1;
                round.rejections.push(("(reply)".to_string(), vec![reason]));
                return Ok(round);
            }
        };
        let (drafts, broken) = drafts_of(&parsed);
        round.proposed = drafts.len() + broken.len();
        round.rejections.extend(broken);
        let digest = envelope.digest();
        for draft in drafts {
            let id = case_id(self.cases.len() + 1);
            let verdict = case_from_draft(&draft, &id, self.ctx.site)
                .and_then(|case| validate_case(&case, self.ctx.site, &self.cases, self.ctx.required).map(|()| case));
            match verdict {
                Ok(mut case) => {
                    let (priority, overridden) = assign_priority(&case, &draft.priority, self.ctx.site, self.ctx.required);
                    case.priority = priority;
                    self.overrides += usize::from(overridden);
                    self.provenance.insert(
                        id,
                        Provenance {
                            chunk_id: chunk.chunk_id.clone(),
                            prompt_digest: digest.clone(),
                            refined,
                            proposed_priority: draft.priority.clone(),
                            priority_overridden: overridden,
                        },
                    );
                    self.cases.push(case);
                    round.accepted += 1;
                }
                Err(reasons) => round
                    .rejections
                    .push((draft.name.clone(), reasons.iter().map(ToString::to_string).collect())),
            }
        }
        for (name, reasons) in &round.rejections {
            self.rejected.push(RejectedCase { chunk_id: chunk.chunk_id.clone(), name: name.clone(), reasons: reasons.clone() });
        }
        Ok(round)
    }
}

/// Visits pages in chunk-plan order, prompting once per chunk and once more
/// with the rejection reasons when anything was rejected. Accepted cases
/// are numbered TC01… in acceptance order.
pub fn generate_suite(
    site: &SiteRepresentation,
    application: &str,
    instruction: &str,
    backend: &dyn Backend,
) -> Result<TestSuite, TestGenError> {
    if site.chunk_plan.is_empty() {
        return Err(TestGenError::GenerationExhausted { page: None, reason: "empty chunk plan".into() });
    }
    let required = derive_required_types(instruction);
    let mut builder = Builder {
        ctx: Context { site, application, instruction, required: &required },
        cases: Vec::new(),
        provenance: BTreeMap::new(),
        rejected: Vec::new(),
        overrides: 0,
    };

    let mut pages: Vec<&str> = Vec::new();
    for chunk in &site.chunk_plan {
        if !pages.contains(&chunk.scope.page_url.as_str()) {
            pages.push(&chunk.scope.page_url);
        }
    }
    for page in pages {
        let (mut proposed, mut accepted) = (0, 0);
        for chunk in site.chunk_plan.iter().filter(|c| c.scope.page_url == page) {
            let envelope = generation_prompt(site, application, instruction, &required, chunk, &builder.cases);
            let first = builder.run_round(backend, &envelope, chunk, false)?;
            proposed += first.proposed;
            accepted += first.accepted;
            if first.rejections.is_empty() {
                continue;
            }
            let envelope =
                refinement_prompt(site, application, instruction, &required, chunk, &builder.cases, &first.rejections);
            let second = builder.run_round(backend, &envelope, chunk, true)?;
            proposed += second.proposed;
            accepted += second.accepted;
        }
        if proposed > 0 && accepted == 0 {
            return Err(TestGenError::GenerationExhausted {
                page: Some(page.to_string()),
                reason: format!("{proposed} proposals, none valid after refinement"),
            });
        }
    }

    debug_assert!(check_suite(&builder.cases, site, &required).is_empty());
    let suite = TestSuite {
        application: application.to_string(),
        base_url: site.base_url.clone(),
        instruction_text: instruction.to_string(),
        minimum_cases: minimum_cases(instruction),
        required_types: required.clone(),
        cases: builder.cases,
        provenance: builder.provenance,
        rejected: builder.rejected,
        priority_overrides: builder.overrides,
    };
    match suite.minimum_cases {
        Some(minimum) if suite.cases.len() < minimum => Err(TestGenError::BelowMinimum {
            minimum,
            produced: suite.cases.len(),
            suite: Box::new(suite),
        }),
        _ => Ok(suite),
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

/// Markdown table with the ID / name / priority / description columns.
pub fn render_suite_table(suite: &TestSuite) -> String {
    let mut out = String::from("| Test Case ID | Test Case Name | Priority | Description |\n|---|---|---|---|\n");
    for case in &suite.cases {
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            case.id,
            cell(&case.name),
            case.priority,
            cell(&case.description)
        ));
    }
    out
}

#[cfg(test)]
mod tests;
