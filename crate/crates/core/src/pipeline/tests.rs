use super::*;
use crate::exec::CaseStatus;
use crate::fixtures::bundle_from_archive;

fn fixture_pipeline(app: FixtureApp, profile: FailureProfile, dir: &Path) -> Pipeline {
    Pipeline::new(&PipelineConfig::for_fixture(app, profile, dir)).expect("fixture config is valid")
}

#[test]
fn bundled_transcripts_are_current() {
    // QEFLOW_BLESS=1 rewrites the bundles after an intentional prompt change
    let bless = std::env::var("QEFLOW_BLESS").is_ok_and(|v| v == "1");
    for app in FixtureApp::ALL {
        let recorded = bundle_from_archive(&record_fixture_transcripts(app).unwrap());
        if bless {
            std::fs::write(app.transcripts_path(), &recorded).unwrap();
            continue;
        }
        assert!(
            recorded == app.transcripts_json(),
            "{app}: bundled transcripts are stale; re-run with QEFLOW_BLESS=1"
        );
    }
}

#[test]
fn config_parses_from_toml_with_defaults() {
    let config = PipelineConfig::from_toml(
        r#"
fixture = "swag"
seed = 7

[crawl]
max_pages = 5

[llm]
backend = "mock"

[executor]
default_timeout_ms = 2000
"#,
    )
    .unwrap();
    assert_eq!(config.seed, 7);
    assert_eq!(config.crawl.max_pages, Some(5));
    assert_eq!(config.llm.backend, LlmBackendKind::Mock);
    assert_eq!(config.executor.default_timeout_ms, 2000);
    assert_eq!(config.executor.slow_timeout_ms, DEFAULT_SLOW_TIMEOUT_MS);
    assert_eq!(config.budget_tokens, DEFAULT_BUDGET_TOKENS);
    assert!(PipelineConfig::from_toml("unknown_key = 1").is_err());
}

#[test]
fn config_errors_are_reported_before_any_phase() {
    let cases = [
        (PipelineConfig::default(), "base_url"),
        (
            PipelineConfig {
                crawl: CrawlSettings { base_url: Some("http://example.test/".into()), ..Default::default() },
                ..Default::default()
            },
            "instruction_path",
        ),
        (
            PipelineConfig {
                llm: LlmSettings { backend: LlmBackendKind::Live, ..Default::default() },
                ..PipelineConfig::for_fixture(FixtureApp::Swag, FailureProfile::None, "out")
            },
            "endpoint",
        ),
        (
            PipelineConfig {
                executor: ExecutorSettings { mode: ExecutorMode::Webdriver, ..Default::default() },
                ..PipelineConfig::for_fixture(FixtureApp::Swag, FailureProfile::None, "out")
            },
            "executor.endpoint",
        ),
        (
            PipelineConfig { fixture: Some("nope".into()), ..Default::default() },
            "nope",
        ),
        (
            PipelineConfig {
                instruction_path: Some("/nonexistent/instruction.txt".into()),
                ..PipelineConfig::for_fixture(FixtureApp::Swag, FailureProfile::None, "out")
            },
            "instruction.txt",
        ),
    ];
    for (config, needle) in cases {
        let err = Pipeline::new(&config).err().expect("config must be rejected");
        assert_eq!(err.exit_code(), 2, "{err}");
        assert!(err.to_string().contains(needle), "{err} should mention {needle}");
    }
}

#[test]
fn fixture_runs_end_to_end_with_the_expected_split() {
    for app in FixtureApp::ALL {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = fixture_pipeline(app, app.failure_profile(), dir.path());
        let report = pipeline.run().unwrap();
        let (cases, passed) = app.expected_split();
        assert_eq!(report.metrics.total_cases, cases, "{app}");
        assert_eq!(report.metrics.passed, passed, "{app}");
        let run: RunResult = pipeline.read(Phase::Report, RUN_FILE, Phase::Execute).unwrap();
        let failed: Vec<&str> = run
            .case_status
            .iter()
            .filter(|(_, s)| **s != CaseStatus::Passed)
            .map(|(id, _)| id.as_str())
            .collect();
        assert_eq!(failed, app.expected_failures(), "{app}");
        for name in [SITE_FILE, SUITE_FILE, BINDINGS_FILE, RUN_FILE, "report.md", "report.json"] {
            assert!(dir.path().join(name).is_file(), "{app}: {name} missing");
        }
        assert!(dir.path().join(PAGES_DIR).join("0001.json").is_file());
    }
}

#[test]
fn unprofiled_fixtures_pass_every_case() {
    for app in FixtureApp::ALL {
        let dir = tempfile::tempdir().unwrap();
        let report = fixture_pipeline(app, FailureProfile::None, dir.path()).run().unwrap();
        assert_eq!(report.metrics.passed, report.metrics.total_cases, "{app}: {:?}", report.failures);
    }
}

#[test]
fn phases_resume_from_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = fixture_pipeline(FixtureApp::Swag, FailureProfile::Swag, dir.path());
    pipeline.run().unwrap();
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    let before: Vec<String> = [SITE_FILE, SUITE_FILE, BINDINGS_FILE, RUN_FILE, "report.json"].map(read).to_vec();
    for phase in [Phase::Synthesize, Phase::Generate, Phase::Bind, Phase::Execute, Phase::Report] {
        pipeline.run_phase(phase).unwrap();
    }
    let after: Vec<String> = [SITE_FILE, SUITE_FILE, BINDINGS_FILE, RUN_FILE, "report.json"].map(read).to_vec();
    assert_eq!(before, after);
}

#[test]
fn a_phase_without_its_inputs_names_the_missing_producer() {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = fixture_pipeline(FixtureApp::Swag, FailureProfile::None, dir.path());
    let err = pipeline.generate().unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("run `synthesize` first"), "{err}");
    let err = pipeline.synthesize().unwrap_err();
    assert!(err.to_string().contains("run `crawl` first"), "{err}");
}

#[test]
fn llm_report_profile_adds_the_recorded_summary() {
    for app in FixtureApp::ALL {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig {
            report_profile: ReportProfile::Llm,
            ..PipelineConfig::for_fixture(app, app.failure_profile(), dir.path())
        };
        let report = Pipeline::new(&config).unwrap().run().unwrap();
        assert!(report.llm_summary.is_some(), "{app}: {:?}", report.notices);
        assert!(report.notices.is_empty());
    }
}

#[test]
fn mock_backend_runs_without_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        llm: LlmSettings { backend: LlmBackendKind::Mock, ..Default::default() },
        ..PipelineConfig::for_fixture(FixtureApp::Medibox, FailureProfile::None, dir.path())
    };
    let pipeline = Pipeline::new(&config).unwrap();
    pipeline.crawl().unwrap();
    pipeline.synthesize().unwrap();
    // the rule mock writes too few cases for "a minimum of 10"
    match pipeline.generate() {
        Ok(suite) => assert!(!suite.cases.is_empty()),
        Err(e) => {
            assert_eq!(e.exit_code(), 4, "{e}");
            assert!(dir.path().join(SUITE_FILE).is_file());
        }
    }
}

#[test]
fn served_runs_keep_the_written_suite_digest() {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = fixture_pipeline(FixtureApp::Swag, FailureProfile::None, dir.path());
    pipeline.run().unwrap();
    let site: SiteRepresentation = pipeline.read(Phase::Execute, SITE_FILE, Phase::Synthesize).unwrap();
    let suite: TestSuite = pipeline.read(Phase::Execute, SUITE_FILE, Phase::Generate).unwrap();
    let bindings: BindingSet = pipeline.read(Phase::Execute, BINDINGS_FILE, Phase::Bind).unwrap();
    let expected: RunResult = pipeline.read(Phase::Execute, RUN_FILE, Phase::Execute).unwrap();
    let exec = ExecConfig::default();
    let commands = compile_commands(&suite, &site, &bindings, &exec).unwrap();
    let server = serve_fixture(FixtureApp::Swag, FailureProfile::None).unwrap();
    let mut session = SimulatedSession::new(Box::new(HttpTransport::default()), "simulated:http");
    let run = run_served(&suite, &commands, &mut session, &exec, None, |u| server.rebase(u));
    assert_eq!(run.suite_digest, expected.suite_digest);
    assert_eq!(run.case_status, expected.case_status);
}
