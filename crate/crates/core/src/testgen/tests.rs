use std::collections::{BTreeSet, VecDeque};
use std::sync::Mutex;

use proptest::prelude::*;
use serde_json::json;

use super::*;
use crate::dom::page_model_from_html;
use crate::llm::{ChatMessage, LlmError};
use crate::site::synthesize_models;

const BASE: &str = "https://shop.test/";
const SWAG_INSTRUCTION: &str = "Generate a detailed test plan for logging in to the Sauce Demo application using \
    valid credentials (standard_user/secret_sauce) and invalid credentials. The script should test both \
    successful and failed login attempts and validate error messages.";

fn site() -> SiteRepresentation {
    let pages = [
        ("/", r#"<title>Login</title><form action="/inventory.html"><input id="user-name" name="user-name"><input id="password" type="password" name="password"><input type="submit" id="login-button" value="Login"></form><div class="error"><h3 data-test="error"></h3></div>"#),
        ("/inventory.html", r#"<title>Inventory</title><div class="list"><div class="item"><a href="/item/1">A</a><span>1</span></div><div class="item"><a href="/item/2">B</a><span>2</span></div><div class="item"><a href="/item/3">C</a><span>3</span></div></div>"#),
        ("/admin", r#"<title>Admin</title><button id="wipe">Wipe</button>"#),
    ];
    let models = pages
        .iter()
        .map(|(p, html)| page_model_from_html(&format!("https://shop.test{p}"), html).unwrap())
        .collect();
    synthesize_models(BASE, models, 4096, None).unwrap()
}

fn eid(site: &SiteRepresentation, page: &str, id: &str) -> String {
    site.page(page)
        .unwrap()
        .element_digests
        .iter()
        .find(|d| d.attr("id") == Some(id))
        .unwrap()
        .element_id
        .to_string()
}

fn login_draft(site: &SiteRepresentation, name: &str, user: &str) -> Value {
    json!({
        "name": name,
        "priority": "High",
        "description": "Log in and land on the inventory.",
        "test_type": "authentication",
        "target_page": "/",
        "steps": [
            {"verb": "navigate", "target": "/"},
            {"verb": "type", "target": eid(site, BASE, "user-name"), "argument": user},
            {"verb": "type", "target": eid(site, BASE, "password"), "argument": "slot:password"},
            {"verb": "click", "target": eid(site, BASE, "login-button")},
            {"verb": "assert_url", "target": "/inventory.html"}
        ],
        "expected": ["inventory is shown"]
    })
}

fn parse(site: &SiteRepresentation, value: Value, id: &str) -> TestCase {
    let draft: CaseDraft = serde_json::from_value(value).unwrap();
    case_from_draft(&draft, id, site).unwrap()
}

fn swag_types() -> RequiredTypes {
    derive_required_types(SWAG_INSTRUCTION)
}

fn kinds(result: Result<(), Vec<RejectReason>>) -> BTreeSet<RejectKind> {
    result.unwrap_err().into_iter().map(|r| r.kind).collect()
}

#[test]
fn empty_instruction_requires_only_predefined_types() {
    let r = derive_required_types("");
    assert!(r.extracted.is_empty());
    assert_eq!(r.required, TestType::predefined());
    assert_eq!(r.predefined.len(), 4);
}

#[test]
fn error_messages_demand_error_handling() {
    let r = swag_types();
    assert!(r.extracted.contains(&TestType::new(TestType::ERROR_HANDLING)));
    assert!(r.extracted.contains(&TestType::new("authentication")));
}

#[test]
fn extracting_only_predefined_types_leaves_r_equal_to_e() {
    let r = derive_required_types("Check every input format, navigation link and unique record.");
    assert!(r.extracted.is_subset(&r.predefined));
    assert_eq!(r.required, r.predefined);
}

#[test]
fn lexicon_matches_whole_words_only() {
    assert!(extract_types("please reregister").is_empty());
    assert!(!extract_types("Re-register the user").is_empty());
    assert!(extract_types("login").contains(&TestType::new("authentication")));
}

#[test]
fn minimum_is_read_from_the_instruction() {
    assert_eq!(
        minimum_cases("Create and execute a minimum of 10 functional test scripts specifically for the user signup process."),
        Some(10)
    );
    assert_eq!(minimum_cases("at least 3 cases"), Some(3));
    assert_eq!(minimum_cases(SWAG_INSTRUCTION), None);
}

fn label_pool() -> Vec<TestType> {
    ["field_validation", "error_handling", "navigation", "data_consistency", "authentication", "performance", "security", "functional"]
        .into_iter()
        .map(TestType::new)
        .collect()
}

fn instruction_strategy() -> impl Strategy<Value = String> {
    let mut words: Vec<&'static str> = LEXICON.iter().map(|(p, _)| *p).collect();
    words.extend(["the", "user", "page", "verify", "button", "Error!", "sign-up", "LOGIN.", "and", "123"]);
    prop::collection::vec(prop::sample::select(words), 0..12).prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn union_law_and_monotonicity(
        mask in 0u8..=255,
        first in instruction_strategy(),
        second in instruction_strategy(),
    ) {
        let predefined: BTreeSet<TestType> = label_pool()
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t)
            .collect();
        let r = derive_with_predefined(predefined.clone(), &first);
        let union: BTreeSet<TestType> = r.predefined.union(&r.extracted).cloned().collect();
        prop_assert_eq!(&r.required, &union);
        prop_assert!(r.predefined.is_subset(&r.required));
        prop_assert!(r.extracted.is_subset(&r.required));
        prop_assert_eq!(&r.predefined, &predefined);
        let longer = derive_with_predefined(predefined, &format!("{first} {second}"));
        prop_assert!(r.extracted.is_subset(&longer.extracted));
    }
}

#[test]
fn well_formed_case_is_accepted() {
    let site = site();
    let case = parse(&site, login_draft(&site, "Login with valid credentials", "standard_user"), "TC01");
    validate_case(&case, &site, &[], &swag_types()).unwrap();
    assert_eq!(case.target_page, BASE);
    assert_eq!(case.steps[4].target, "https://shop.test/inventory.html");
    // the slot reference was inferred from the type step
    let slot = case.slot("password").unwrap();
    assert_eq!(slot.constraint.kind, crate::data::ConstraintKind::Password);
}

#[test]
fn dangling_element_is_contextual() {
    let site = site();
    let mut draft = login_draft(&site, "Dangling", "u");
    draft["steps"][3]["target"] = json!("e0999");
    let case = parse(&site, draft, "TC01");
    assert_eq!(kinds(validate_case(&case, &site, &[], &swag_types())), BTreeSet::from([RejectKind::Contextual]));
}

#[test]
fn duplicate_name_is_uniqueness() {
    let site = site();
    let accepted = vec![parse(&site, login_draft(&site, "Login with valid credentials", "a"), "TC01")];
    let case = parse(&site, login_draft(&site, "login with  VALID credentials", "b"), "TC02");
    assert_eq!(kinds(validate_case(&case, &site, &accepted, &swag_types())), BTreeSet::from([RejectKind::Uniqueness]));
    // same steps under another name are a duplicate too
    let case = parse(&site, login_draft(&site, "Another name", "a"), "TC02");
    assert_eq!(kinds(validate_case(&case, &site, &accepted, &swag_types())), BTreeSet::from([RejectKind::Uniqueness]));
}

#[test]
fn navigation_without_an_edge_is_flow() {
    let site = site();
    let mut draft = login_draft(&site, "Sneak into admin", "u");
    draft["steps"][0]["target"] = json!("/admin");
    let case = parse(&site, draft, "TC01");
    assert_eq!(kinds(validate_case(&case, &site, &[], &swag_types())), BTreeSet::from([RejectKind::Flow]));
    // element steps on an unreachable page are flow failures as well
    let draft = json!({
        "name": "Wipe", "priority": "Low", "description": "d", "test_type": "navigation",
        "target_page": "/admin", "steps": [{"verb": "click", "target": eid(&site, "https://shop.test/admin", "wipe")}],
        "expected": []
    });
    let case = parse(&site, draft, "TC01");
    assert_eq!(kinds(validate_case(&case, &site, &[], &swag_types())), BTreeSet::from([RejectKind::Flow]));
}

#[test]
fn ill_typed_steps_are_structural() {
    let site = site();
    let mut draft = login_draft(&site, "Bad kinds", "u");
    draft["steps"][3]["target"] = json!("#login-button");
    draft["steps"][1].as_object_mut().unwrap().remove("argument");
    let case = parse(&site, draft, "TC01");
    let reasons = validate_case(&case, &site, &[], &swag_types()).unwrap_err();
    assert!(reasons.iter().filter(|r| r.kind == RejectKind::Structural).count() >= 2, "{reasons:?}");
    let mut draft = login_draft(&site, "Bad verb", "u");
    draft["steps"][0]["verb"] = json!("teleport");
    let draft: CaseDraft = serde_json::from_value(draft).unwrap();
    assert_eq!(case_from_draft(&draft, "TC01", &site).unwrap_err()[0].kind, RejectKind::Structural);
}

#[test]
fn unrequired_type_is_contextual() {
    let site = site();
    let mut draft = login_draft(&site, "Typed oddly", "u");
    draft["test_type"] = json!("usability");
    let case = parse(&site, draft, "TC01");
    assert_eq!(kinds(validate_case(&case, &site, &[], &swag_types())), BTreeSet::from([RejectKind::Contextual]));
}

#[test]
fn priorities_stay_in_the_closed_set() {
    let site = site();
    let r = swag_types();
    let mut draft = login_draft(&site, "Login with problem user", "problem_user");
    draft["description"] = json!("Test login using problem_user and validate issues.");
    let case = parse(&site, draft, "TC01");
    assert_eq!(assign_priority(&case, "Critical", &site, &r), (Priority::Low, true));
    assert_eq!(assign_priority(&case, "medium", &site, &r), (Priority::Medium, false));

    let mut draft = login_draft(&site, "Verify successful user registration", "new_user");
    draft["test_type"] = json!("field_validation");
    draft["description"] = json!("Ensure all required fields must be filled before form submission.");
    let case = parse(&site, draft, "TC02");
    assert_eq!(assign_priority(&case, "Critical", &site, &r), (Priority::High, true));

    let draft = login_draft(&site, "Login with invalid password", "standard_user");
    let case = parse(&site, draft, "TC03");
    assert_eq!(rule_priority(&case, &site, &r), Priority::Medium);
}

/// Replies in order, recording the prompts it saw.
struct Script {
    replies: Mutex<VecDeque<String>>,
    prompts: Mutex<Vec<String>>,
}

impl Script {
    fn new(replies: Vec<Value>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().map(|v| v.to_string()).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }
}

impl Backend for Script {
    fn id(&self) -> String {
        "script".into()
    }
    fn context_limit(&self) -> usize {
        1 << 20
    }
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.prompts.lock().unwrap().push(messages.last().unwrap().content.clone());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| LlmError::BackendUnavailable("script exhausted".into()))
    }
}

#[test]
fn generation_refines_rejections_and_numbers_in_acceptance_order() {
    let site = site();
    let mut dangling = login_draft(&site, "Login with locked-out user", "locked_out_user");
    dangling["steps"][3]["target"] = json!("e0999");
    let mut fixed = login_draft(&site, "Login with locked-out user", "locked_out_user");
    fixed["priority"] = json!("Low");
    fixed["steps"][4] = json!({"verb": "assert_visible", "target": eid(&site, BASE, "user-name")});
    let script = Script::new(vec![
        json!({"cases": [login_draft(&site, "Login with valid credentials", "standard_user"), dangling]}),
        json!({"cases": [fixed]}),
        json!({"cases": []}),
        json!({"cases": []}),
    ]);
    let suite = generate_suite(&site, "Swag Labs", SWAG_INSTRUCTION, &script).unwrap();
    let names: Vec<_> = suite.cases.iter().map(|c| (c.id.as_str(), c.name.as_str(), c.priority)).collect();
    assert_eq!(
        names,
        vec![
            ("TC01", "Login with valid credentials", Priority::High),
            ("TC02", "Login with locked-out user", Priority::Low)
        ]
    );
    assert!(!suite.provenance["TC01"].refined);
    assert!(suite.provenance["TC02"].refined);
    assert_eq!(suite.rejected.len(), 1);
    assert!(suite.rejected[0].reasons[0].starts_with("contextual:"));

    let prompts = script.prompts.lock().unwrap();
    // login page twice, then the inventory and the unreachable admin page
    assert_eq!(prompts.len(), 4);
    assert!(prompts[0].starts_with("[template testgen.v1]"));
    assert!(prompts[0].contains("REQUIRED TYPES authentication, data_consistency, error_handling"));
    assert!(prompts[1].starts_with("[template testgen.refine.v1]"));
    assert!(prompts[1].contains("- \"Login with locked-out user\": contextual:"));
    // later prompts carry the accepted cases
    assert!(prompts[1].contains("- TC01 Login with valid credentials"));
    assert!(prompts[2].contains("- TC02 Login with locked-out user"));
    assert!(check_suite(&suite.cases, &site, &suite.required_types).is_empty());
}

#[test]
fn empty_site_is_exhausted() {
    let mut site = site();
    site.chunk_plan.clear();
    let script = Script::new(vec![]);
    assert!(matches!(
        generate_suite(&site, "x", "", &script),
        Err(TestGenError::GenerationExhausted { page: None, .. })
    ));
}

#[test]
fn page_with_only_invalid_cases_is_exhausted() {
    let site = site();
    let mut bad = login_draft(&site, "Bad", "u");
    bad["test_type"] = json!("usability");
    let script = Script::new(vec![json!({"cases": [bad.clone()]}), json!({"cases": [bad]})]);
    match generate_suite(&site, "x", SWAG_INSTRUCTION, &script) {
        Err(TestGenError::GenerationExhausted { page: Some(page), .. }) => assert_eq!(page, BASE),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stated_minimum_is_enforced() {
    let site = site();
    let script = Script::new(vec![
        json!({"cases": [login_draft(&site, "Login with valid credentials", "standard_user")]}),
        json!({"cases": []}),
        json!({"cases": []}),
    ]);
    match generate_suite(&site, "x", "Write at least 3 login tests.", &script) {
        Err(TestGenError::BelowMinimum { minimum: 3, produced: 1, suite }) => assert_eq!(suite.cases.len(), 1),
        other => panic!("{other:?}"),
    }
}

#[test]
fn suite_table_mirrors_the_reported_columns() {
    let site = site();
    let script = Script::new(vec![
        json!({"cases": [login_draft(&site, "Login with valid credentials", "standard_user")]}),
        json!({"cases": []}),
        json!({"cases": []}),
    ]);
    let suite = generate_suite(&site, "x", SWAG_INSTRUCTION, &script).unwrap();
    let table = render_suite_table(&suite);
    assert!(table.starts_with("| Test Case ID | Test Case Name | Priority | Description |\n|---|---|---|---|\n"));
    assert!(table.contains("| TC01 | Login with valid credentials | High | Log in and land on the inventory. |"));
}

#[test]
fn rule_mock_suite_contains_a_valid_credentials_case() {
    let site = site();
    let suite = generate_suite(&site, "Swag Labs", SWAG_INSTRUCTION, &crate::llm::RuleMockBackend).unwrap();
    assert!(check_suite(&suite.cases, &site, &suite.required_types).is_empty());
    let valid = suite.cases.iter().find(|c| c.name.contains("valid credentials")).unwrap();
    assert_eq!(valid.priority, Priority::High);
    assert_eq!(valid.data_slots.len(), 2);
    assert!(suite.cases.iter().any(|c| c.name == "Login with invalid credentials"));
}
