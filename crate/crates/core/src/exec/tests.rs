use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::*;
use crate::dom::page_model_from_html;
use crate::site::synthesize_models;
use crate::testgen::{DataSlot, Priority, RequiredTypes, TestStep, TestType};

const BASE: &str = "http://app.test/";
const LOGIN: &str = r#"<title>Login</title><form action="/login" method="post" novalidate>
<input id="user-name" name="user"><input id="password" name="pw" type="password">
<input type="submit" id="login-button" value="Login"></form>
<h3 id="error"></h3><a id="help" href="/help" inert>Help</a><button id="ghost" style="display:none">x</button>"#;

fn page(url: &str, status: u16, body: &str) -> HttpResponse {
    HttpResponse { status, url: url.into(), body: body.into(), delay_ms: 0 }
}

/// In-memory application: the login form accepts `standard_user` and
/// answers slowly for `slow_user`.
#[derive(Clone, Default)]
struct App {
    seen: Arc<Mutex<Vec<HttpRequest>>>,
    lose_after: Option<usize>,
}

impl Transport for App {
    fn send(&mut self, request: &HttpRequest, _timeout_ms: u64) -> Result<HttpResponse, StepError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(request.clone());
        if self.lose_after.is_some_and(|n| seen.len() > n) {
            return Err(StepError::SessionLost("browser crashed".into()));
        }
        let field = |k: &str| request.form.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
        Ok(match (request.method, request.url.as_str()) {
            (Method::Get, BASE) => page(BASE, 200, LOGIN),
            (Method::Post, "http://app.test/login") => match field("user") {
                Some("standard_user") => page("http://app.test/home", 200, "<title>Home</title><h1 id='hi'>Welcome</h1>"),
                Some("slow_user") => HttpResponse { delay_ms: 15_000, ..page("http://app.test/home", 200, "<title>Home</title>") },
                Some("boom") => page("http://app.test/login", 500, "oops"),
                _ => page("http://app.test/login", 200, &LOGIN.replace("<h3 id=\"error\"></h3>", "<h3 id=\"error\">Username and password do not match</h3>")),
            },
            (_, url) => page(url, 404, "<title>Not found</title>"),
        })
    }
}

fn session(app: &App) -> SimulatedSession {
    SimulatedSession::new(Box::new(app.clone()), "test")
}

fn cmd(verb: Verb, locator: Option<&str>, payload: Option<&str>) -> ActionCommand {
    ActionCommand {
        verb,
        resolved_locator: locator.map(str::to_string),
        payload: payload.map(str::to_string),
        timeout_ms: DEFAULT_TIMEOUT_MS,
        page: BASE.into(),
        element_id: None,
    }
}

fn login(user: &str) -> Vec<ActionCommand> {
    vec![
        cmd(Verb::Navigate, None, Some(BASE)),
        cmd(Verb::Type, Some("#user-name"), Some(user)),
        cmd(Verb::Type, Some("#password"), Some("secret_sauce")),
        cmd(Verb::Click, Some("#login-button"), None),
    ]
}

fn run_all(s: &mut SimulatedSession, commands: &[ActionCommand]) -> Result<(), StepError> {
    commands.iter().try_for_each(|c| s.execute(c))
}

#[test]
fn login_form_posts_typed_values() {
    let app = App::default();
    let mut s = session(&app);
    run_all(&mut s, &login("standard_user")).unwrap();
    assert_eq!(s.current_url(), Some("http://app.test/home"));
    let post = app.seen.lock().unwrap()[1].clone();
    assert_eq!(post.method, Method::Post);
    assert_eq!(post.form, vec![("user".to_string(), "standard_user".to_string()), ("pw".into(), "secret_sauce".into())]);
    s.execute(&cmd(Verb::AssertText, Some("#hi"), Some("Welcome"))).unwrap();
    s.execute(&cmd(Verb::AssertUrl, None, Some("http://app.test/home"))).unwrap();
    s.execute(&cmd(Verb::AssertText, Some("title"), Some("Home"))).unwrap();
}

#[test]
fn error_message_and_failed_assertions() {
    let app = App::default();
    let mut s = session(&app);
    run_all(&mut s, &login("nobody")).unwrap();
    s.execute(&cmd(Verb::AssertText, Some("#error"), Some("do not match"))).unwrap();
    let err = s.execute(&cmd(Verb::AssertUrl, None, Some("http://app.test/home"))).unwrap_err();
    assert!(matches!(err, StepError::AssertionFailed(_)));
}

#[test]
fn slow_response_times_out_on_the_virtual_clock() {
    let app = App::default();
    let mut s = session(&app);
    let before = s.now();
    let err = run_all(&mut s, &login("slow_user")).unwrap_err();
    assert!(matches!(err, StepError::Timeout { waited_ms: DEFAULT_TIMEOUT_MS, .. }));
    assert!(err.to_string().contains("timeout"));
    assert!((s.now() - before).num_milliseconds() as u64 >= DEFAULT_TIMEOUT_MS);
}

#[test]
fn server_errors_are_reported() {
    let app = App::default();
    let mut s = session(&app);
    let err = run_all(&mut s, &login("boom")).unwrap_err();
    assert_eq!(err, StepError::Server { status: 500, url: "http://app.test/login".into() });
}

#[test]
fn inaccessible_and_missing_elements() {
    let app = App::default();
    let mut s = session(&app);
    s.execute(&cmd(Verb::Navigate, None, Some(BASE))).unwrap();
    assert!(matches!(s.execute(&cmd(Verb::Click, Some("#help"), None)), Err(StepError::NotInteractable(_))));
    assert!(matches!(s.execute(&cmd(Verb::Click, Some("#ghost"), None)), Err(StepError::NotInteractable(_))));
    let missing = s.execute(&cmd(Verb::Click, Some("#nope"), None)).unwrap_err();
    assert!(matches!(missing, StepError::ElementNotFound(_)));
    assert!(!missing.to_string().contains("timeout"));
    assert!(matches!(s.execute(&cmd(Verb::AssertVisible, Some("#ghost"), None)), Err(StepError::AssertionFailed(_))));
    // clicking the submit control of an empty form still posts
    s.execute(&cmd(Verb::Click, Some("#login-button"), None)).unwrap();
}

#[test]
fn browser_side_validation_and_field_semantics() {
    let form = r#"<form action="/done" id="f"><input id="req" name="req" required><input id="short" name="short" maxlength="3">
        <select id="sel" name="sel"><option value="a">A</option><option value="b">Bee</option></select>
        <input type="checkbox" id="cb" name="cb"><button id="go">Go</button></form>"#;
    let seen = Arc::new(Mutex::new(Vec::new()));
    struct Form(Arc<Mutex<Vec<HttpRequest>>>, &'static str);
    impl Transport for Form {
        fn send(&mut self, r: &HttpRequest, _: u64) -> Result<HttpResponse, StepError> {
            self.0.lock().unwrap().push(r.clone());
            Ok(page(&r.url, 200, self.1))
        }
    }
    let form: &'static str = Box::leak(form.to_string().into_boxed_str());
    let mut s = SimulatedSession::new(Box::new(Form(seen.clone(), form)), "form");
    s.execute(&cmd(Verb::Navigate, None, Some(BASE))).unwrap();
    // the required field is empty, so the browser keeps the page
    s.execute(&cmd(Verb::Click, Some("#go"), None)).unwrap();
    assert_eq!(seen.lock().unwrap().len(), 1);
    s.execute(&cmd(Verb::Type, Some("#req"), Some("x"))).unwrap();
    s.execute(&cmd(Verb::Type, Some("#short"), Some("abcdef"))).unwrap();
    s.execute(&cmd(Verb::Select, Some("#sel"), Some("Bee"))).unwrap();
    s.execute(&cmd(Verb::Click, Some("#cb"), None)).unwrap();
    assert!(matches!(s.execute(&cmd(Verb::Select, Some("#sel"), Some("zzz"))), Err(StepError::ElementNotFound(_))));
    s.execute(&cmd(Verb::Click, Some("#go"), None)).unwrap();
    let last = seen.lock().unwrap().last().unwrap().clone();
    assert_eq!(last.url, "http://app.test/done?req=x&short=abc&sel=b&cb=on");
}

fn site() -> SiteRepresentation {
    let model = page_model_from_html(BASE, LOGIN).unwrap();
    synthesize_models(BASE, vec![model], 4096, None).unwrap()
}

fn eid(site: &SiteRepresentation, id: &str) -> String {
    site.page(BASE).unwrap().element_digests.iter().find(|d| d.attr("id") == Some(id)).unwrap().element_id.to_string()
}

fn step(ordinal: usize, verb: Verb, target: &str, argument: Option<&str>) -> TestStep {
    TestStep { ordinal, verb, target: target.into(), page: None, argument: argument.map(str::to_string) }
}

fn case(id: &str, steps: Vec<TestStep>) -> TestCase {
    TestCase {
        id: id.into(),
        name: id.into(),
        priority: Priority::High,
        description: "d".into(),
        test_type: TestType::new("navigation"),
        target_page: BASE.into(),
        steps,
        expected: Vec::new(),
        data_slots: Vec::<DataSlot>::new(),
    }
}

#[test]
fn interpretation_substitutes_slots_and_locators() {
    let site = site();
    let c = case(
        "TC01",
        vec![
            step(1, Verb::Navigate, BASE, None),
            step(2, Verb::Type, &eid(&site, "user-name"), Some("slot:username")),
            step(3, Verb::Type, &eid(&site, "password"), Some("secret_sauce")),
        ],
    );
    let bindings = BTreeMap::from([("username".to_string(), "standard_user".to_string())]);
    let commands = interpret(&c, &bindings, &site, &ExecConfig::default()).unwrap();
    assert_eq!(commands[0].payload.as_deref(), Some(BASE));
    assert_eq!(commands[0].resolved_locator, None);
    assert_eq!(commands[1].resolved_locator.as_deref(), Some("#user-name"));
    assert_eq!(commands[1].payload.as_deref(), Some("standard_user"));
    assert_eq!(commands[2].payload.as_deref(), Some("secret_sauce"));
    assert!(commands.iter().all(|c| c.timeout_ms == DEFAULT_TIMEOUT_MS));

    assert!(interpret(&case("TC02", vec![]), &bindings, &site, &ExecConfig::default()).unwrap().is_empty());
    assert_eq!(
        interpret(&c, &BTreeMap::new(), &site, &ExecConfig::default()),
        Err(ExecError::UnboundSlot { case: "TC01".into(), slot: "username".into() })
    );
    let dangling = case("TC03", vec![step(1, Verb::Click, "e0999", None)]);
    assert!(matches!(interpret(&dangling, &bindings, &site, &ExecConfig::default()), Err(ExecError::UnknownElement { .. })));

    let mut slow = ExecConfig::default();
    slow.slow_pages.insert(BASE.into());
    assert!(interpret(&c, &bindings, &site, &slow).unwrap().iter().all(|c| c.timeout_ms == DEFAULT_SLOW_TIMEOUT_MS));
}

fn suite(cases: Vec<TestCase>) -> TestSuite {
    TestSuite {
        application: "app".into(),
        base_url: BASE.into(),
        instruction_text: String::new(),
        required_types: RequiredTypes { predefined: TestType::predefined(), extracted: Default::default(), required: TestType::predefined() },
        minimum_cases: None,
        cases,
        provenance: Default::default(),
        rejected: Vec::new(),
        priority_overrides: 0,
    }
}

fn login_case(site: &SiteRepresentation, id: &str, user: &str) -> TestCase {
    case(
        id,
        vec![
            step(1, Verb::Type, &eid(site, "user-name"), Some(user)),
            step(2, Verb::Type, &eid(site, "password"), Some("pw")),
            step(3, Verb::Click, &eid(site, "login-button"), None),
            step(4, Verb::AssertUrl, "http://app.test/home", None),
        ],
    )
}

fn commands_for(s: &TestSuite, site: &SiteRepresentation) -> BTreeMap<String, Vec<ActionCommand>> {
    s.cases
        .iter()
        .map(|c| (c.id.clone(), interpret(c, &BTreeMap::new(), site, &ExecConfig::default()).unwrap()))
        .collect()
}

#[test]
fn run_records_statuses_skips_and_geometry() {
    let site = site();
    let s = suite(vec![
        login_case(&site, "TC01", "standard_user"),
        login_case(&site, "TC02", "slow_user"),
        login_case(&site, "TC03", "nobody"),
        case("TC04", vec![]),
    ]);
    let app = App::default();
    let mut session = session(&app);
    let run = run_suite(&s, &commands_for(&s, &site), &mut session, &ExecConfig::default(), None);
    run.check_consistency().unwrap();
    assert_eq!(run.case_status["TC01"], CaseStatus::Passed);
    assert_eq!(run.case_status["TC02"], CaseStatus::Failed);
    assert_eq!(run.case_status["TC03"], CaseStatus::Failed);
    assert_eq!(run.case_status["TC04"], CaseStatus::Passed);
    let tc02: Vec<_> = run.outcomes_for("TC02").map(|o| o.status).collect();
    assert_eq!(tc02, vec![StepStatus::Passed, StepStatus::Passed, StepStatus::Failed, StepStatus::Skipped]);
    assert!(run.outcomes_for("TC02").nth(2).unwrap().message.contains("timeout"));
    assert_eq!(run.environment.session, "simulated:test");
    assert_eq!(run.started_at, SIMULATED_EPOCH.parse::<DateTime<Utc>>().unwrap());
    assert!(run.geometry[BASE].contains_key(&crate::dom::ElementId::new(eid(&site, "user-name"))));
    // each case starts with a fresh navigation to the base page
    let gets = app.seen.lock().unwrap().iter().filter(|r| r.url == BASE).count();
    assert_eq!(gets, 4);
}

#[test]
fn lost_session_errors_the_remaining_cases() {
    let site = site();
    let s = suite(vec![
        login_case(&site, "TC01", "standard_user"),
        login_case(&site, "TC02", "standard_user"),
        login_case(&site, "TC03", "standard_user"),
    ]);
    let app = App { lose_after: Some(3), ..App::default() };
    let mut session = session(&app);
    let run = run_suite(&s, &commands_for(&s, &site), &mut session, &ExecConfig::default(), None);
    run.check_consistency().unwrap();
    assert_eq!(run.case_status["TC01"], CaseStatus::Passed);
    assert_eq!(run.case_status["TC02"], CaseStatus::Error);
    assert_eq!(run.case_status["TC03"], CaseStatus::Error);
    let first = run.outcomes_for("TC03").next().unwrap();
    assert_eq!((first.ordinal, first.status), (0, StepStatus::Error));
    assert!(first.message.contains("session lost"));
}

#[test]
fn empty_suite_runs_vacuously() {
    let s = suite(vec![]);
    let mut session = session(&App::default());
    let run = run_suite(&s, &BTreeMap::new(), &mut session, &ExecConfig::default(), None);
    assert!(run.outcomes.is_empty() && run.case_status.is_empty());
    run.check_consistency().unwrap();
}
