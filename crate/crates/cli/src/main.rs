use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qeflow::fixtures::{serve_fixture, FailureProfile, Fixture, FixtureApp, WebDriverShim};
use qeflow::pipeline::{ExecutorMode, LlmBackendKind, Phase, Pipeline, PipelineConfig, PipelineError};
use qeflow::report::ReportProfile;

/// Crawl a web application, generate a test suite with an LLM, execute it and report.
#[derive(Debug, Parser)]
#[command(name = "qeflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch pages into `pages/`.
    Crawl(Overrides),
    /// Build `site.json` from `pages/`.
    Synthesize(Overrides),
    /// Generate `suite.json` from `site.json`.
    Generate(Overrides),
    /// Bind test data into `bindings.json`.
    Bind(Overrides),
    /// Execute the suite into `run.json`.
    Execute(Overrides),
    /// Write `report.md` and `report.json`.
    Report(Overrides),
    /// All phases in order.
    Run(Overrides),
    /// Bundled fixture applications.
    #[command(subcommand)]
    Fixture(FixtureCommand),
}

#[derive(Debug, Subcommand)]
enum FixtureCommand {
    /// Serve a fixture over HTTP on 127.0.0.1 until interrupted.
    Serve {
        #[arg(long, default_value = "swag")]
        app: FixtureApp,
        #[arg(long, default_value = "none")]
        failure_profile: FailureProfile,
        /// Also start a WebDriver endpoint driving the fixture without a browser.
        #[arg(long)]
        webdriver: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportProfileArg {
    Hermetic,
    Llm,
}

/// Flags override values from `--config`.
#[derive(Debug, Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run against a bundled fixture (`swag` or `medibox`) in process.
    #[arg(long)]
    fixture: Option<String>,
    /// Failure injection for the fixture: `none`, `swag` or `medibox`; defaults to the fixture's own.
    #[arg(long)]
    failure_profile: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    max_pages: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    instruction: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    llm_backend: Option<LlmBackendKind>,
    #[arg(long)]
    llm_endpoint: Option<String>,
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long)]
    transcript_dir: Option<PathBuf>,
    #[arg(long)]
    budget_tokens: Option<usize>,
    #[arg(long)]
    executor_mode: Option<ExecutorMode>,
    #[arg(long)]
    webdriver_url: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    report_profile: Option<ReportProfileArg>,
    /// Artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(self) -> Result<PipelineConfig, PipelineError> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if self.fixture.is_some() {
            c.fixture = self.fixture;
        }
        if self.failure_profile.is_some() {
            c.failure_profile = self.failure_profile;
        }
        if self.base_url.is_some() {
            c.crawl.base_url = self.base_url;
        }
        if self.max_pages.is_some() {
            c.crawl.max_pages = self.max_pages;
        }
        if self.max_depth.is_some() {
            c.crawl.max_depth = self.max_depth;
        }
        if self.instruction.is_some() {
            c.instruction_path = self.instruction;
        }
        if self.dataset.is_some() {
            c.dataset_path = self.dataset;
        }
        if let Some(backend) = self.llm_backend {
            c.llm.backend = backend;
        }
        if self.llm_endpoint.is_some() {
            c.llm.endpoint = self.llm_endpoint;
        }
        if self.llm_model.is_some() {
            c.llm.model = self.llm_model;
        }
        if self.transcript_dir.is_some() {
            c.llm.transcript_dir = self.transcript_dir;
        }
        if let Some(budget) = self.budget_tokens {
            c.budget_tokens = budget;
        }
        if let Some(mode) = self.executor_mode {
            c.executor.mode = mode;
        }
        if self.webdriver_url.is_some() {
            c.executor.endpoint = self.webdriver_url;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(profile) = self.report_profile {
            c.report_profile = match profile {
                ReportProfileArg::Hermetic => ReportProfile::Hermetic,
                ReportProfileArg::Llm => ReportProfile::Llm,
            };
        }
        if let Some(out) = self.out {
            c.artifact_dir = out;
        }
        Ok(c)
    }
}

fn run_phase(phase: Option<Phase>, overrides: Overrides) -> Result<(), PipelineError> {
    let pipeline = Pipeline::new(&overrides.resolve()?)?;
    let dir = pipeline.artifact_dir().display().to_string();
    match phase {
        Some(phase) => {
            pipeline.run_phase(phase)?;
            println!("{phase}: done ({dir})");
        }
        None => {
            let report = pipeline.run()?;
            let m = &report.metrics;
            let rate = m.success_rate_percent.map_or("n/a".to_string(), |p| format!("{p}%"));
            println!(
                "{}: {} of {} passed ({rate}), {} failed, {} errored; artifacts in {dir}",
                report.application, m.passed, m.total_cases, m.failed, m.errored
            );
        }
    }
    Ok(())
}

fn serve(app: FixtureApp, profile: FailureProfile, webdriver: bool) -> Result<(), String> {
    let server = serve_fixture(app, profile).map_err(|e| e.to_string())?;
    println!("{app} fixture ({profile} failures) at {}", server.base_url());
    let _shim = if webdriver {
        let shim = WebDriverShim::start(Fixture::new(app, profile)).map_err(|e| e.to_string())?;
        println!("webdriver endpoint at {}", shim.endpoint());
        Some(shim)
    } else {
        None
    };
    let _ = std::io::stdout().flush();
    loop {
        std::thread::park();
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Crawl(o) => run_phase(Some(Phase::Crawl), o),
        Command::Synthesize(o) => run_phase(Some(Phase::Synthesize), o),
        Command::Generate(o) => run_phase(Some(Phase::Generate), o),
        Command::Bind(o) => run_phase(Some(Phase::Bind), o),
        Command::Execute(o) => run_phase(Some(Phase::Execute), o),
        Command::Report(o) => run_phase(Some(Phase::Report), o),
        Command::Run(o) => run_phase(None, o),
        Command::Fixture(FixtureCommand::Serve { app, failure_profile, webdriver }) => {
            return match serve(app, failure_profile, webdriver) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(3)
                }
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
