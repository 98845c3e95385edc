//! Runs the phases in order around an artifact directory. Every phase reads
//! its inputs from the files earlier phases wrote, so any phase can be
//! re-run on its own.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::canonical::{from_json, to_canonical_json};
use crate::crawler::{crawl, CrawlConfig, Fetcher, HttpFetcher, PageCapture, DEFAULT_MAX_DEPTH, DEFAULT_USER_AGENT};
use crate::data::{bind_suite, BindingSet, Dataset};
use crate::exec::{
    interpret, run_suite, ActionCommand, ExecConfig, ExecError, HttpTransport, RunResult, Session, SimulatedSession,
    WebDriverConfig, WebDriverSession, DEFAULT_SLOW_TIMEOUT_MS, DEFAULT_TIMEOUT_MS,
};
use crate::fixtures::{
    serve_fixture, FailureProfile, Fixture, FixtureApp, FixtureFetcher, FixtureTransport, ScriptedBackend,
};
use crate::llm::{
    record_transcript, Backend, LiveBackend, LiveConfig, RecordingBackend, ReplayBackend, RuleMockBackend,
    TranscriptArchive, DEFAULT_CONTEXT_LIMIT,
};
use crate::report::{categorize_failures, compute_metrics, render_report, Report, ReportInputs, ReportProfile};
use crate::site::{synthesize, SiteRepresentation, SynthesisOptions, DEFAULT_BUDGET_TOKENS};
use crate::testgen::{generate_suite, TestGenError, TestSuite};

pub const DEFAULT_SEED: u64 = 2025;
pub const DEFAULT_ARTIFACT_DIR: &str = "qeflow-out";

pub const PAGES_DIR: &str = "pages";
pub const SITE_FILE: &str = "site.json";
pub const SUITE_FILE: &str = "suite.json";
pub const BINDINGS_FILE: &str = "bindings.json";
pub const RUN_FILE: &str = "run.json";
pub const SCREENSHOTS_DIR: &str = "screenshots";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmBackendKind {
    Live,
    #[default]
    Replay,
    Mock,
}

impl FromStr for LlmBackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Self::Live),
            "replay" => Ok(Self::Replay),
            "mock" => Ok(Self::Mock),
            _ => Err(format!("unknown LLM backend `{s}` (expected live, replay or mock)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorMode {
    #[default]
    Simulated,
    Webdriver,
}

impl FromStr for ExecutorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulated" => Ok(Self::Simulated),
            "webdriver" => Ok(Self::Webdriver),
            _ => Err(format!("unknown executor mode `{s}` (expected simulated or webdriver)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlSettings {
    pub base_url: Option<String>,
    pub max_pages: Option<usize>,
    pub max_depth: Option<usize>,
    pub same_origin_only: Option<bool>,
    pub fetch_timeout_ms: Option<u64>,
    pub parallelism: Option<usize>,
    pub user_agent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub backend: LlmBackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Directory of recorded transcripts for the replay backend.
    pub transcript_dir: Option<PathBuf>,
    pub api_key_env: Option<String>,
    pub context_limit: Option<usize>,
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorSettings {
    pub mode: ExecutorMode,
    /// WebDriver endpoint, e.g. `http://127.0.0.1:4444`.
    pub endpoint: Option<String>,
    pub default_timeout_ms: u64,
    pub slow_timeout_ms: u64,
    pub slow_pages: Vec<String>,
}

impl Default for ExecutorSettings {
    fn default() -> Self {
        Self {
            mode: ExecutorMode::default(),
            endpoint: None,
            default_timeout_ms: DEFAULT_TIMEOUT_MS,
            slow_timeout_ms: DEFAULT_SLOW_TIMEOUT_MS,
            slow_pages: Vec::new(),
        }
    }
}

/// Everything a run needs, as read from a TOML file and command-line flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub application: Option<String>,
    /// Run against a bundled fixture (`swag` or `medibox`) in process.
    pub fixture: Option<String>,
    /// Failure injection for the fixture: `none`, `swag` or `medibox`;
    /// defaults to the fixture's own.
    pub failure_profile: Option<String>,
    pub crawl: CrawlSettings,
    pub instruction_path: Option<PathBuf>,
    pub dataset_path: Option<PathBuf>,
    pub llm: LlmSettings,
    pub budget_tokens: usize,
    pub executor: ExecutorSettings,
    pub seed: u64,
    pub artifact_dir: PathBuf,
    pub report_profile: ReportProfile,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            application: None,
            fixture: None,
            failure_profile: None,
            crawl: CrawlSettings::default(),
            instruction_path: None,
            dataset_path: None,
            llm: LlmSettings::default(),
            budget_tokens: DEFAULT_BUDGET_TOKENS,
            executor: ExecutorSettings::default(),
            seed: DEFAULT_SEED,
            artifact_dir: PathBuf::from(DEFAULT_ARTIFACT_DIR),
            report_profile: ReportProfile::Hermetic,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config file {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// A hermetic run against a bundled fixture with recorded transcripts.
    pub fn for_fixture(app: FixtureApp, profile: FailureProfile, artifact_dir: impl Into<PathBuf>) -> Self {
        Self {
            fixture: Some(app.slug().to_string()),
            failure_profile: Some(profile.to_string()),
            artifact_dir: artifact_dir.into(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Crawl,
    Synthesize,
    Generate,
    Bind,
    Execute,
    Report,
}

impl Phase {
    pub const ALL: [Phase; 6] =
        [Phase::Crawl, Phase::Synthesize, Phase::Generate, Phase::Bind, Phase::Execute, Phase::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Crawl => "crawl",
            Phase::Synthesize => "synthesize",
            Phase::Generate => "generate",
            Phase::Bind => "bind",
            Phase::Execute => "execute",
            Phase::Report => "report",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{phase} failed: {message}")]
    Phase { phase: Phase, message: String },
    /// The phase finished but its output breaks a guarantee (too few cases,
    /// an inconsistent run).
    #[error("{phase} validation failed: {message}")]
    Validation { phase: Phase, message: String },
}

impl PipelineError {
    fn phase(phase: Phase, message: impl fmt::Display) -> Self {
        Self::Phase { phase, message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Phase { .. } => 3,
            Self::Validation { .. } => 4,
        }
    }
}

enum LlmPlan {
    Mock,
    Replay(TranscriptArchive, usize),
    Live(LiveConfig),
}

/// A validated configuration.
pub struct Pipeline {
    application: String,
    fixture: Option<(FixtureApp, FailureProfile)>,
    crawl: CrawlConfig,
    instruction: String,
    dataset: Option<Dataset>,
    llm: LlmPlan,
    budget_tokens: usize,
    exec: ExecConfig,
    mode: ExecutorMode,
    webdriver: Option<String>,
    seed: u64,
    dir: PathBuf,
    report_profile: ReportProfile,
}

fn invalid(message: impl Into<String>) -> PipelineError {
    PipelineError::Config(ConfigError::Invalid(message.into()))
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|source| PipelineError::Config(ConfigError::Io { path: path.to_path_buf(), source }))
}

impl Pipeline {
    /// Checks the configuration and loads instruction, dataset and
    /// transcripts, so a bad setup fails before anything touches the network.
    pub fn new(config: &PipelineConfig) -> Result<Self, PipelineError> {
        let fixture = match &config.fixture {
            None => {
                if config.failure_profile.as_deref().is_some_and(|p| p != "none") {
                    return Err(invalid("failure_profile needs a fixture"));
                }
                None
            }
            Some(name) => {
                let app: FixtureApp = name.parse().map_err(|e: crate::fixtures::FixtureError| invalid(e.to_string()))?;
                let profile = match &config.failure_profile {
                    Some(p) => p.parse().map_err(|e: crate::fixtures::FixtureError| invalid(e.to_string()))?,
                    None => app.failure_profile(),
                };
                Some((app, profile))
            }
        };
        let app = fixture.map(|(a, _)| a);

        let base_url = match (&config.crawl.base_url, app) {
            (Some(url), None) => url.clone(),
            (Some(url), Some(app)) if url.as_str() == app.base_url() => url.clone(),
            (Some(url), Some(app)) => {
                return Err(invalid(format!("fixture {app} serves {}, not {url}", app.base_url())))
            }
            (None, Some(app)) => app.base_url().to_string(),
            (None, None) => return Err(invalid("crawl.base_url is required")),
        };
        let defaults = CrawlConfig::new(base_url.clone());
        let crawl = CrawlConfig {
            base_url,
            max_pages: config.crawl.max_pages.unwrap_or(defaults.max_pages),
            max_depth: config
                .crawl
                .max_depth
                .unwrap_or_else(|| app.map_or(DEFAULT_MAX_DEPTH, FixtureApp::crawl_depth)),
            same_origin_only: config.crawl.same_origin_only.unwrap_or(defaults.same_origin_only),
            fetch_timeout_ms: config.crawl.fetch_timeout_ms.unwrap_or(defaults.fetch_timeout_ms),
            parallelism: config.crawl.parallelism.unwrap_or(defaults.parallelism),
            user_agent: config.crawl.user_agent.clone().unwrap_or_else(|| DEFAULT_USER_AGENT.to_string()),
        };
        crawl.validate().map_err(|e| invalid(e.to_string()))?;

        let instruction = match (&config.instruction_path, app) {
            (Some(path), _) => read_text(path)?,
            (None, Some(app)) => app.instruction().to_string(),
            (None, None) => return Err(invalid("instruction_path is required")),
        };
        if instruction.trim().is_empty() {
            return Err(invalid("the test instruction is empty"));
        }
        let dataset = match (&config.dataset_path, app) {
            (Some(path), _) => Some(Dataset::from_csv(&read_text(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?),
            (None, Some(app)) => Some(app.dataset()),
            (None, None) => None,
        };

        let context_limit = config.llm.context_limit.unwrap_or(DEFAULT_CONTEXT_LIMIT);
        let llm = match config.llm.backend {
            LlmBackendKind::Mock => LlmPlan::Mock,
            LlmBackendKind::Replay => {
                let archive = match (&config.llm.transcript_dir, app) {
                    (Some(dir), _) => TranscriptArchive::load_dir(dir).map_err(|e| invalid(e.to_string()))?,
                    (None, Some(app)) => app.transcripts().map_err(|e| invalid(e.to_string()))?,
                    (None, None) => return Err(invalid("the replay backend needs llm.transcript_dir")),
                };
                LlmPlan::Replay(archive, context_limit)
            }
            LlmBackendKind::Live => {
                let (Some(endpoint), Some(model)) = (&config.llm.endpoint, &config.llm.model) else {
                    return Err(invalid("the live backend needs llm.endpoint and llm.model"));
                };
                let mut live = LiveConfig::new(endpoint.clone(), model.clone());
                live.context_limit = context_limit;
                if let Some(var) = &config.llm.api_key_env {
                    live.api_key_env = var.clone();
                }
                if let Some(ms) = config.llm.timeout_ms {
                    live.timeout_ms = ms;
                }
                LlmPlan::Live(live)
            }
        };

        let settings = &config.executor;
        if settings.mode == ExecutorMode::Webdriver && settings.endpoint.is_none() {
            return Err(invalid("the webdriver executor needs executor.endpoint"));
        }
        if settings.default_timeout_ms == 0 || settings.slow_timeout_ms == 0 {
            return Err(invalid("executor timeouts must be positive"));
        }
        let exec = ExecConfig {
            default_timeout_ms: settings.default_timeout_ms,
            slow_timeout_ms: settings.slow_timeout_ms,
            slow_pages: settings.slow_pages.iter().cloned().collect(),
            fresh_navigation: true,
        };
        let application = config
            .application
            .clone()
            .or_else(|| app.map(|a| a.application().to_string()))
            .or_else(|| url::Url::parse(&crawl.base_url).ok().and_then(|u| u.host_str().map(str::to_string)))
            .unwrap_or_else(|| crawl.base_url.clone());

        Ok(Self {
            application,
            fixture,
            crawl,
            instruction,
            dataset,
            llm,
            budget_tokens: config.budget_tokens,
            exec,
            mode: settings.mode,
            webdriver: settings.endpoint.clone(),
            seed: config.seed,
            dir: config.artifact_dir.clone(),
            report_profile: config.report_profile,
        })
    }

    pub fn artifact_dir(&self) -> &Path {
        &self.dir
    }

    pub fn application(&self) -> &str {
        &self.application
    }

    fn backend(&self) -> Box<dyn Backend> {
        match &self.llm {
            LlmPlan::Mock => Box::new(RuleMockBackend),
            LlmPlan::Replay(archive, limit) => {
                Box::new(ReplayBackend::new(archive.clone()).with_context_limit(*limit))
            }
            LlmPlan::Live(config) => Box::new(LiveBackend::new(config.clone())),
        }
    }

    fn ensure_dir(&self, phase: Phase) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| PipelineError::phase(phase, format!("cannot create {}: {e}", self.dir.display())))
    }

    fn write<T: Serialize>(&self, phase: Phase, name: &str, value: &T) -> Result<(), PipelineError> {
        let text = to_canonical_json(value).map_err(|e| PipelineError::phase(phase, e))?;
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| PipelineError::phase(phase, format!("cannot write {}: {e}", path.display())))
    }

    fn read<T: DeserializeOwned>(&self, phase: Phase, name: &str, producer: Phase) -> Result<T, PipelineError> {
        let path = self.dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            PipelineError::phase(phase, format!("cannot read {} ({e}); run `{producer}` first", path.display()))
        })?;
        from_json(&text).map_err(|e| PipelineError::phase(phase, format!("{} is malformed: {e}", path.display())))
    }

    pub fn crawl(&self) -> Result<Vec<PageCapture>, PipelineError> {
        let phase = Phase::Crawl;
        let fetcher: Box<dyn Fetcher> = match self.fixture {
            Some((app, _)) => Box::new(FixtureFetcher::new(app)),
            None => Box::new(HttpFetcher::new(
                Duration::from_millis(self.crawl.fetch_timeout_ms),
                self.crawl.user_agent.clone(),
            )),
        };
        let captures = crawl(&self.crawl, fetcher.as_ref()).map_err(|e| PipelineError::phase(phase, e))?;
        self.ensure_dir(phase)?;
        let pages = self.dir.join(PAGES_DIR);
        if pages.exists() {
            std::fs::remove_dir_all(&pages).map_err(|e| PipelineError::phase(phase, e))?;
        }
        std::fs::create_dir_all(&pages).map_err(|e| PipelineError::phase(phase, e))?;
        for (i, capture) in captures.iter().enumerate() {
            self.write(phase, &format!("{PAGES_DIR}/{:04}.json", i + 1), capture)?;
        }
        log::info!("crawled {} pages from {}", captures.len(), self.crawl.base_url);
        Ok(captures)
    }

    /// Captures in crawl order.
    pub fn load_pages(&self, phase: Phase) -> Result<Vec<PageCapture>, PipelineError> {
        let dir = self.dir.join(PAGES_DIR);
        let entries = std::fs::read_dir(&dir).map_err(|e| {
            PipelineError::phase(phase, format!("cannot read {} ({e}); run `crawl` first", dir.display()))
        })?;
        let mut names: Vec<String> = entries
            .filter_map(Result::ok)
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".json"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(PipelineError::phase(phase, format!("{} holds no captures; run `crawl` first", dir.display())));
        }
        names.iter().map(|n| self.read(phase, &format!("{PAGES_DIR}/{n}"), Phase::Crawl)).collect()
    }

    pub fn synthesize(&self) -> Result<SiteRepresentation, PipelineError> {
        let phase = Phase::Synthesize;
        let captures = self.load_pages(phase)?;
        let options = SynthesisOptions { base_url: self.crawl.base_url.clone(), budget_tokens: self.budget_tokens };
        let backend = self.backend();
        let site = synthesize(&captures, &options, Some(backend.as_ref())).map_err(|e| PipelineError::phase(phase, e))?;
        site.check_integrity().map_err(|message| PipelineError::Validation { phase, message })?;
        self.write(phase, SITE_FILE, &site)?;
        Ok(site)
    }

    pub fn generate(&self) -> Result<TestSuite, PipelineError> {
        let phase = Phase::Generate;
        let site: SiteRepresentation = self.read(phase, SITE_FILE, Phase::Synthesize)?;
        let backend = self.backend();
        match generate_suite(&site, &self.application, &self.instruction, backend.as_ref()) {
            Ok(suite) => {
                self.write(phase, SUITE_FILE, &suite)?;
                Ok(suite)
            }
            Err(TestGenError::BelowMinimum { minimum, produced, suite }) => {
                // keep what was accepted so it can be inspected
                self.write(phase, SUITE_FILE, &suite)?;
                Err(PipelineError::Validation {
                    phase,
                    message: format!("instruction asks for at least {minimum} cases, {produced} accepted"),
                })
            }
            Err(e) => Err(PipelineError::phase(phase, e)),
        }
    }

    pub fn bind(&self) -> Result<BindingSet, PipelineError> {
        let phase = Phase::Bind;
        let suite: TestSuite = self.read(phase, SUITE_FILE, Phase::Generate)?;
        let backend = self.backend();
        let bindings = bind_suite(&suite, self.dataset.as_ref(), Some(backend.as_ref()), self.seed)
            .map_err(|e| PipelineError::phase(phase, e))?;
        self.write(phase, BINDINGS_FILE, &bindings)?;
        Ok(bindings)
    }

    pub fn execute(&self) -> Result<RunResult, PipelineError> {
        let phase = Phase::Execute;
        let site: SiteRepresentation = self.read(phase, SITE_FILE, Phase::Synthesize)?;
        let suite: TestSuite = self.read(phase, SUITE_FILE, Phase::Generate)?;
        let bindings: BindingSet = self.read(phase, BINDINGS_FILE, Phase::Bind)?;
        let commands = compile_commands(&suite, &site, &bindings, &self.exec).map_err(|e| PipelineError::phase(phase, e))?;
        let screenshots = self.dir.join(SCREENSHOTS_DIR);
        let run = match (self.mode, self.fixture) {
            (ExecutorMode::Simulated, fixture) => {
                let (transport, label): (Box<dyn crate::exec::Transport>, String) = match fixture {
                    Some((app, profile)) => (
                        Box::new(FixtureTransport::new(Fixture::new(app, profile))),
                        format!("simulated:fixture:{app}:{profile}"),
                    ),
                    None => (Box::new(HttpTransport::default()), "simulated:http".to_string()),
                };
                let mut session = SimulatedSession::new(transport, label);
                run_suite(&suite, &commands, &mut session, &self.exec, Some(&screenshots))
            }
            (ExecutorMode::Webdriver, fixture) => {
                let endpoint = self.webdriver.as_deref().unwrap_or_default();
                let mut session = WebDriverSession::connect(&WebDriverConfig::new(endpoint))
                    .map_err(|e| PipelineError::phase(phase, format!("WebDriver session at {endpoint}: {e}")))?;
                match fixture {
                    None => run_suite(&suite, &commands, &mut session, &self.exec, Some(&screenshots)),
                    Some((app, profile)) => {
                        let server = serve_fixture(app, profile).map_err(|e| PipelineError::phase(phase, e))?;
                        run_served(&suite, &commands, &mut session, &self.exec, Some(&screenshots), |u| server.rebase(u))
                    }
                }
            }
        };
        run.check_consistency().map_err(|message| PipelineError::Validation { phase, message })?;
        self.write(phase, RUN_FILE, &run)?;
        Ok(run)
    }

    pub fn report(&self) -> Result<Report, PipelineError> {
        let phase = Phase::Report;
        let site: SiteRepresentation = self.read(phase, SITE_FILE, Phase::Synthesize)?;
        let suite: TestSuite = self.read(phase, SUITE_FILE, Phase::Generate)?;
        let bindings: BindingSet = self.read(phase, BINDINGS_FILE, Phase::Bind)?;
        let run: RunResult = self.read(phase, RUN_FILE, Phase::Execute)?;
        let backend = self.backend();
        let report = build_report(&site, &suite, &bindings, &run, self.report_profile, Some(backend.as_ref()));
        report.write(&self.dir).map_err(|e| PipelineError::phase(phase, e))?;
        Ok(report)
    }

    /// All phases in order.
    pub fn run(&self) -> Result<Report, PipelineError> {
        self.crawl()?;
        self.synthesize()?;
        self.generate()?;
        self.bind()?;
        self.execute()?;
        self.report()
    }

    pub fn run_phase(&self, phase: Phase) -> Result<(), PipelineError> {
        match phase {
            Phase::Crawl => self.crawl().map(drop),
            Phase::Synthesize => self.synthesize().map(drop),
            Phase::Generate => self.generate().map(drop),
            Phase::Bind => self.bind().map(drop),
            Phase::Execute => self.execute().map(drop),
            Phase::Report => self.report().map(drop),
        }
    }
}

/// Executor commands for every case, keyed by case id.
pub fn compile_commands(
    suite: &TestSuite,
    site: &SiteRepresentation,
    bindings: &BindingSet,
    config: &ExecConfig,
) -> Result<BTreeMap<String, Vec<ActionCommand>>, ExecError> {
    suite
        .cases
        .iter()
        .map(|case| Ok((case.id.clone(), interpret(case, &bindings.values_for(&case.id), site, config)?)))
        .collect()
}

/// Runs a suite written for one origin against the same application served
/// elsewhere: URL payloads and the base URL are moved through `rebase`, and
/// the result keeps the digest of the suite as written.
pub fn run_served(
    suite: &TestSuite,
    commands: &BTreeMap<String, Vec<ActionCommand>>,
    session: &mut dyn Session,
    config: &ExecConfig,
    artifacts: Option<&Path>,
    rebase: impl Fn(&str) -> String,
) -> RunResult {
    let mut served = suite.clone();
    served.base_url = rebase(&suite.base_url);
    let moved: BTreeMap<String, Vec<ActionCommand>> = commands
        .iter()
        .map(|(id, steps)| {
            let steps = steps
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    if c.verb.takes_url() {
                        c.payload = c.payload.as_deref().map(&rebase);
                    }
                    c
                })
                .collect();
            (id.clone(), steps)
        })
        .collect();
    let mut run = run_suite(&served, &moved, session, config, artifacts);
    run.suite_digest = crate::canonical::sha256_hex(to_canonical_json(suite).expect("suite serializes"));
    run
}

pub fn build_report(
    site: &SiteRepresentation,
    suite: &TestSuite,
    bindings: &BindingSet,
    run: &RunResult,
    profile: ReportProfile,
    backend: Option<&dyn Backend>,
) -> Report {
    let metrics = compute_metrics(run, suite, site);
    let categories = categorize_failures(run);
    let inputs = ReportInputs { suite, run, site, bindings: Some(bindings) };
    render_report(&metrics, &categories, inputs, profile, backend)
}

/// Re-creates the transcripts bundled with a fixture: synthesis is answered
/// by the rule mock, generation by the fixture's scripted model, and the
/// report summary is recorded for every failure profile.
pub fn record_fixture_transcripts(app: FixtureApp) -> Result<TranscriptArchive, PipelineError> {
    let config = CrawlConfig { max_depth: app.crawl_depth(), ..CrawlConfig::new(app.base_url()) };
    let captures = crawl(&config, &FixtureFetcher::new(app)).map_err(|e| PipelineError::phase(Phase::Crawl, e))?;
    let oracle = RecordingBackend::new(RuleMockBackend);
    let site = synthesize(&captures, &SynthesisOptions::new(app.base_url()), Some(&oracle))
        .map_err(|e| PipelineError::phase(Phase::Synthesize, e))?;
    let model = RecordingBackend::with_archive(ScriptedBackend::new(app, site.clone()), record_transcript(&oracle));
    let suite = generate_suite(&site, app.application(), app.instruction(), &model)
        .map_err(|e| PipelineError::phase(Phase::Generate, e))?;
    let dataset = app.dataset();
    let bindings = bind_suite(&suite, Some(&dataset), Some(&model), DEFAULT_SEED)
        .map_err(|e| PipelineError::phase(Phase::Bind, e))?;
    let exec = ExecConfig::default();
    let commands = compile_commands(&suite, &site, &bindings, &exec).map_err(|e| PipelineError::phase(Phase::Execute, e))?;
    for profile in [FailureProfile::None, app.failure_profile()] {
        let transport = FixtureTransport::new(Fixture::new(app, profile));
        let mut session = SimulatedSession::new(Box::new(transport), format!("simulated:fixture:{app}:{profile}"));
        let run = run_suite(&suite, &commands, &mut session, &exec, None);
        build_report(&site, &suite, &bindings, &run, ReportProfile::Llm, Some(&model));
    }
    Ok(record_transcript(&model))
}

#[cfg(test)]
mod tests;
