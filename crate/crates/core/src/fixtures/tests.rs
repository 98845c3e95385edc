use super::*;
use crate::exec::{
    run_suite, CaseStatus, ExecConfig, HttpRequest, HttpTransport, RunResult, SimulatedSession, Transport,
    WebDriverConfig, WebDriverSession,
};
use crate::pipeline::{compile_commands, Pipeline, PipelineConfig};
use crate::report::{categorize_failures, ErrorCategory};

fn post(path: &str, form: &[(&str, &str)]) -> FixtureRequest {
    FixtureRequest {
        method: Method::Post,
        path: path.to_string(),
        query: Vec::new(),
        form: form.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    }
}

fn login(fixture: &Fixture, user: &str, pass: &str) -> FixtureReply {
    fixture.handle(&post("/inventory.html", &[("user-name", user), ("password", pass)]))
}

#[test]
fn swag_login_outcomes_follow_the_demo() {
    let fixture = Fixture::new(FixtureApp::Swag, FailureProfile::None);
    let cases = [
        ("", "", Some("/?error=username_required")),
        ("", "secret_sauce", Some("/?error=username_required")),
        ("standard_user", "", Some("/?error=password_required")),
        ("nobody", "secret_sauce", Some("/?error=mismatch")),
        ("standard_user", "wrong", Some("/?error=mismatch")),
        ("locked_out_user", "secret_sauce", Some("/?error=locked_out")),
        ("standard_user", "secret_sauce", Some("/inventory.html")),
        ("performance_glitch_user", "secret_sauce", Some("/inventory.html")),
    ];
    for (user, pass, location) in cases {
        let reply = login(&fixture, user, pass);
        assert_eq!(reply.status, 303, "{user}/{pass}");
        assert_eq!(reply.location.as_deref(), location, "{user}/{pass}");
        assert_eq!(reply.delay_ms, 0);
    }
    let page = fixture.handle(&FixtureRequest::get("/?error=locked_out")).body;
    assert!(page.contains("Epic sadface: Sorry, this user has been locked out."));
    let clean = fixture.handle(&FixtureRequest::get("/")).body;
    assert!(clean.contains(r#"id="login-error" hidden>"#));
    assert_eq!(fixture.handle(&FixtureRequest::get("/cart.html")).status, 404);
}

#[test]
fn swag_profile_slows_only_the_glitch_user() {
    let fixture = Fixture::new(FixtureApp::Swag, FailureProfile::Swag);
    assert_eq!(login(&fixture, "performance_glitch_user", "secret_sauce").delay_ms, INJECTED_DELAY_MS);
    assert_eq!(login(&fixture, "standard_user", "secret_sauce").delay_ms, 0);
}

fn signup(fixture: &Fixture, fields: [&str; 5]) -> FixtureReply {
    let names = ["fullName", "mobile", "email", "password", "confirmPassword"];
    let form: Vec<(&str, &str)> = names.into_iter().zip(fields).collect();
    fixture.handle(&post("/UserSignup", &form))
}

#[test]
fn medibox_signup_validates_then_checks_uniqueness() {
    let fixture = Fixture::new(FixtureApp::Medibox, FailureProfile::None);
    let good = ["Ada Lovelace", "0498765432", "ada@example.test", "Analytic#1", "Analytic#1"];
    let refused = [
        (["", "", "", "", ""], "Full name is required"),
        (["Ada 2", "0498765432", "ada@example.test", "Analytic#1", "Analytic#1"], "letters only"),
        (["Ada", "0498765432", "ada@", "Analytic#1", "Analytic#1"], "valid email address"),
        (["Ada", "12345", "ada@example.test", "Analytic#1", "Analytic#1"], "10-digit mobile"),
        (["Ada", "0498765432", "ada@example.test", "alllowercase", "alllowercase"], "at least 8 characters"),
        (["Ada", "0498765432", "ada@example.test", "Analytic#1", "Analytic#2"], "Passwords do not match"),
        (["Ada", "0412345678", "ada@example.test", "Analytic#1", "Analytic#1"], "Mobile number is already registered"),
        (
            ["Ada", "0498765432", "REGISTERED.user@medibox.test", "Analytic#1", "Analytic#1"],
            "Email address is already registered",
        ),
    ];
    for (fields, message) in refused {
        let reply = signup(&fixture, fields);
        assert_eq!(reply.status, 200, "{fields:?}");
        assert!(reply.body.contains(message), "{fields:?} should report {message}");
    }

    let reply = signup(&fixture, good);
    assert_eq!(reply.location.as_deref(), Some("/SignIn?registered=1"));
    assert!(fixture.state().emails.contains("ada@example.test"));
    assert!(signup(&fixture, good).body.contains("Mobile number is already registered"));
    let signed_in = fixture.handle(&post("/SignIn", &[("email", "ada@example.test"), ("password", "Analytic#1")]));
    assert_eq!(signed_in.location.as_deref(), Some("/"));

    fixture.reset();
    assert!(!fixture.state().emails.contains("ada@example.test"));
    assert!(fixture.state().emails.contains("registered.user@medibox.test"));
}

#[test]
fn medibox_profile_breaks_three_things() {
    let good = ["Ada Lovelace", "0498765432", "ada@example.test", "Analytic#1", "Analytic#1"];
    let plain = Fixture::new(FixtureApp::Medibox, FailureProfile::None);
    let broken = Fixture::new(FixtureApp::Medibox, FailureProfile::Medibox);

    let home = |f: &Fixture| f.handle(&FixtureRequest::get("/")).body;
    assert!(home(&plain).contains(r#"href="/UserSignup">"#));
    assert!(home(&broken).contains(r#"href="/UserSignup" inert>"#));
    assert_eq!(signup(&plain, good).delay_ms, 0);
    assert_eq!(signup(&broken, good).delay_ms, INJECTED_DELAY_MS);
    let signin = |f: &Fixture| f.handle(&FixtureRequest::get("/SignIn?registered=1")).body;
    assert!(signin(&plain).contains(r#"<h1 id="signin-title">Sign In</h1>"#));
    assert!(signin(&broken).contains(r#"<h1 id="signin-title">Log In</h1>"#));
    assert!(signin(&plain).contains("Registration successful"));
}

#[test]
fn pages_are_deterministic() {
    for app in FixtureApp::ALL {
        let a = Fixture::new(app, FailureProfile::None);
        let b = Fixture::new(app, FailureProfile::None);
        for path in ["/", "/UserSignup", "/SignIn", "/inventory.html"] {
            assert_eq!(a.handle(&FixtureRequest::get(path)), b.handle(&FixtureRequest::get(path)));
        }
    }
}

#[test]
fn names_round_trip() {
    for app in FixtureApp::ALL {
        assert_eq!(app.to_string().parse::<FixtureApp>().unwrap(), app);
        assert_eq!(app.failure_profile().to_string().parse::<FailureProfile>().unwrap(), app.failure_profile());
    }
    assert!(matches!("shop".parse::<FixtureApp>(), Err(FixtureError::UnknownApp(_))));
    assert!(matches!("slow".parse::<FailureProfile>(), Err(FixtureError::UnknownProfile(_))));
}

#[test]
fn transport_follows_redirects_and_reports_delay() {
    let mut transport = FixtureTransport::new(Fixture::new(FixtureApp::Swag, FailureProfile::Swag));
    let request = HttpRequest {
        method: Method::Post,
        url: "http://swaglabs.fixture/inventory.html".into(),
        form: vec![("user-name".into(), "performance_glitch_user".into()), ("password".into(), "secret_sauce".into())],
    };
    let reply = transport.send(&request, 1000).unwrap();
    assert_eq!(reply.status, 200);
    assert_eq!(reply.url, "http://swaglabs.fixture/inventory.html");
    assert_eq!(reply.delay_ms, INJECTED_DELAY_MS);
    assert!(reply.body.contains("Products"));

    let request = HttpRequest {
        method: Method::Post,
        url: "http://swaglabs.fixture/inventory.html".into(),
        form: vec![("user-name".into(), "x".into())],
    };
    let reply = transport.send(&request, 1000).unwrap();
    assert_eq!(reply.url, "http://swaglabs.fixture/?error=password_required");
    assert!(transport.send(&HttpRequest::get("http://elsewhere.test/"), 1000).is_err());
}

#[test]
fn served_fixture_answers_over_http() {
    let server = serve_fixture(FixtureApp::Medibox, FailureProfile::None).unwrap();
    assert!(server.base_url().starts_with("http://127.0.0.1:"));
    assert_eq!(server.rebase("http://medibox.fixture/SignIn"), format!("{}SignIn", server.base_url()));
    assert_eq!(server.rebase("/UserSignup"), format!("{}UserSignup", server.base_url()));
    let mut http = HttpTransport::default();
    let page = http.send(&HttpRequest::get(server.rebase("/UserSignup")), 5000).unwrap();
    assert_eq!(page.status, 200);
    assert!(page.body.contains(r#"id="signup-form""#));
    let form = [
        ("fullName", "Ada Lovelace"),
        ("mobile", "0498765432"),
        ("email", "ada@example.test"),
        ("password", "Analytic#1"),
        ("confirmPassword", "Analytic#1"),
    ];
    let request = HttpRequest {
        method: Method::Post,
        url: server.rebase("/UserSignup"),
        form: form.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
    };
    let reply = http.send(&request, 5000).unwrap();
    assert!(reply.url.ends_with("/SignIn?registered=1"), "{}", reply.url);
    assert!(reply.body.contains("Registration successful"));
    assert!(server.fixture().state().emails.contains("ada@example.test"));
    assert_eq!(http.send(&HttpRequest::get(server.rebase("/missing")), 5000).unwrap().status, 404);
}

#[test]
fn bundled_transcripts_load_and_verify() {
    for app in FixtureApp::ALL {
        let archive = app.transcripts().unwrap();
        assert!(!archive.is_empty(), "{app}");
        assert_eq!(bundle_from_archive(&archive), app.transcripts_json());
    }
    assert!(archive_from_bundle(r#"[{"digest": "00", "messages": [], "response": "x"}]"#).is_err());
}

struct Generated {
    _dir: tempfile::TempDir,
    pipeline: Pipeline,
}

fn generated(app: FixtureApp, profile: FailureProfile) -> Generated {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(&PipelineConfig::for_fixture(app, profile, dir.path())).unwrap();
    pipeline.crawl().unwrap();
    pipeline.synthesize().unwrap();
    pipeline.generate().unwrap();
    pipeline.bind().unwrap();
    Generated { _dir: dir, pipeline }
}

#[test]
fn replayed_suites_match_the_published_tables() {
    for app in FixtureApp::ALL {
        let g = generated(app, FailureProfile::None);
        let suite = g.pipeline.generate().unwrap();
        assert!(suite.rejected.is_empty(), "{app}: {:?}", suite.rejected);
        let got: Vec<(&str, &str, Priority)> =
            suite.cases.iter().map(|c| (c.id.as_str(), c.name.as_str(), c.priority)).collect();
        assert_eq!(got, app.expected_suite(), "{app}");
    }
}

#[test]
fn failure_profiles_fail_the_published_cases_for_the_published_reasons() {
    let expected = [
        (FixtureApp::Swag, vec![("TC07", ErrorCategory::Timeout)]),
        (
            FixtureApp::Medibox,
            vec![("TC01", ErrorCategory::UiElement), ("TC06", ErrorCategory::Timeout), ("TC10", ErrorCategory::Assertion)],
        ),
    ];
    for (app, categories) in expected {
        let g = generated(app, app.failure_profile());
        let run = g.pipeline.execute().unwrap();
        let got: Vec<(String, ErrorCategory)> = categorize_failures(&run).into_iter().collect();
        let want: Vec<(String, ErrorCategory)> = categories.into_iter().map(|(id, c)| (id.to_string(), c)).collect();
        assert_eq!(got, want, "{app}");
    }
}

fn statuses(run: &RunResult) -> Vec<(String, CaseStatus)> {
    run.case_status.iter().map(|(id, s)| (id.clone(), *s)).collect()
}

#[test]
fn webdriver_client_through_the_shim_matches_the_simulated_session() {
    for app in FixtureApp::ALL {
        let profile = app.failure_profile();
        let g = generated(app, profile);
        let simulated = g.pipeline.execute().unwrap();

        let dir = g.pipeline.artifact_dir();
        let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
        let site = crate::canonical::from_json(&read("site.json")).unwrap();
        let suite: crate::testgen::TestSuite = crate::canonical::from_json(&read("suite.json")).unwrap();
        let bindings = crate::canonical::from_json(&read("bindings.json")).unwrap();
        let config = ExecConfig::default();
        let commands = compile_commands(&suite, &site, &bindings, &config).unwrap();

        let shim = WebDriverShim::start(Fixture::new(app, profile)).unwrap();
        let mut session = WebDriverSession::connect(&WebDriverConfig::new(shim.endpoint())).unwrap();
        let driven = run_suite(&suite, &commands, &mut session, &config, None);
        assert_eq!(statuses(&driven), statuses(&simulated), "{app}");
        assert_eq!(driven.suite_digest, simulated.suite_digest);
        assert_eq!(categorize_failures(&driven), categorize_failures(&simulated), "{app}");
    }
}

#[test]
fn a_direct_session_and_the_fixture_transport_agree() {
    let g = generated(FixtureApp::Swag, FailureProfile::None);
    let run = g.pipeline.execute().unwrap();
    let transport = FixtureTransport::new(Fixture::new(FixtureApp::Swag, FailureProfile::None));
    let mut session = SimulatedSession::new(Box::new(transport), "again");
    let dir = g.pipeline.artifact_dir();
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    let site = crate::canonical::from_json(&read("site.json")).unwrap();
    let suite: crate::testgen::TestSuite = crate::canonical::from_json(&read("suite.json")).unwrap();
    let bindings = crate::canonical::from_json(&read("bindings.json")).unwrap();
    let commands = compile_commands(&suite, &site, &bindings, &ExecConfig::default()).unwrap();
    let again = run_suite(&suite, &commands, &mut session, &ExecConfig::default(), None);
    assert_eq!(statuses(&again), statuses(&run));
    assert_eq!(again.outcomes, run.outcomes);
}
