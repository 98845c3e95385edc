//! Hermetic fixture applications: a login flow modeled on Swag Labs and a
//! signup flow reconstructed from what is known about MediBox, with
//! switchable failure profiles, an in-process transport, a loopback HTTP
//! server, a WebDriver shim, and the scripted model whose recorded replies
//! are bundled as replay transcripts.

mod medibox;
mod scripted;
mod serve;
mod shim;
mod swag;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::exec::Method;
use crate::llm::{LlmError, TranscriptArchive, TranscriptEntry};
use crate::testgen::Priority;

pub use scripted::ScriptedBackend;
pub use serve::{serve_fixture, FixtureFetcher, FixtureServer, FixtureTransport};
pub use shim::WebDriverShim;

/// Delay injected by the failure profiles; it exceeds the default step
/// timeout so the affected step times out.
pub const INJECTED_DELAY_MS: u64 = 15_000;

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("no free local port: {0}")]
    PortUnavailable(String),
    #[error("unknown fixture `{0}` (expected swag or medibox)")]
    UnknownApp(String),
    #[error("unknown failure profile `{0}` (expected none, swag or medibox)")]
    UnknownProfile(String),
    #[error("bundled transcripts: {0}")]
    Transcripts(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureApp {
    Swag,
    Medibox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureProfile {
    #[default]
    None,
    /// The performance-glitch persona's login answers too slowly.
    Swag,
    /// The signup link is inert, a successful registration answers too
    /// slowly, and the sign-in page carries the wrong heading.
    Medibox,
}

impl FromStr for FixtureApp {
    type Err = FixtureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "swag" | "swaglabs" | "swag_labs" => Ok(FixtureApp::Swag),
            "medibox" => Ok(FixtureApp::Medibox),
            other => Err(FixtureError::UnknownApp(other.to_string())),
        }
    }
}

impl FromStr for FailureProfile {
    type Err = FixtureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(FailureProfile::None),
            "swag" => Ok(FailureProfile::Swag),
            "medibox" => Ok(FailureProfile::Medibox),
            other => Err(FixtureError::UnknownProfile(other.to_string())),
        }
    }
}

impl fmt::Display for FixtureApp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl fmt::Display for FailureProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureProfile::None => "none",
            FailureProfile::Swag => "swag",
            FailureProfile::Medibox => "medibox",
        })
    }
}

impl FixtureApp {
    pub const ALL: [FixtureApp; 2] = [FixtureApp::Swag, FixtureApp::Medibox];

    pub fn slug(self) -> &'static str {
        match self {
            FixtureApp::Swag => "swag",
            FixtureApp::Medibox => "medibox",
        }
    }

    pub fn application(self) -> &'static str {
        match self {
            FixtureApp::Swag => "Swag Labs",
            FixtureApp::Medibox => "MediBox",
        }
    }

    /// Origin the in-process transport answers for.
    pub fn base_url(self) -> &'static str {
        match self {
            FixtureApp::Swag => "http://swaglabs.fixture/",
            FixtureApp::Medibox => "http://medibox.fixture/",
        }
    }

    /// The profile reproducing this application's recorded failures.
    pub fn failure_profile(self) -> FailureProfile {
        match self {
            FixtureApp::Swag => FailureProfile::Swag,
            FixtureApp::Medibox => FailureProfile::Medibox,
        }
    }

    pub fn instruction(self) -> &'static str {
        match self {
            FixtureApp::Swag => include_str!("../../fixtures/swag/instruction.txt"),
            FixtureApp::Medibox => include_str!("../../fixtures/medibox/instruction.txt"),
        }
    }

    pub fn dataset_csv(self) -> &'static str {
        match self {
            FixtureApp::Swag => include_str!("../../fixtures/swag/dataset.csv"),
            FixtureApp::Medibox => include_str!("../../fixtures/medibox/dataset.csv"),
        }
    }

    pub fn dataset(self) -> Dataset {
        Dataset::from_csv(self.dataset_csv()).expect("bundled dataset parses")
    }

    pub fn transcripts_json(self) -> &'static str {
        match self {
            FixtureApp::Swag => include_str!("../../fixtures/swag/transcripts.json"),
            FixtureApp::Medibox => include_str!("../../fixtures/medibox/transcripts.json"),
        }
    }

    /// Recorded replies of the scripted model for the hermetic pipeline.
    pub fn transcripts(self) -> Result<TranscriptArchive, FixtureError> {
        Ok(archive_from_bundle(self.transcripts_json())?)
    }

    /// Path of the transcript bundle inside the source tree, for re-recording.
    pub fn transcripts_path(self) -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join(self.slug())
            .join("transcripts.json")
    }

    /// Crawl depth that reaches every page the suites touch.
    pub fn crawl_depth(self) -> usize {
        1
    }

    /// The published suite: (id, name, priority).
    pub fn expected_suite(self) -> &'static [(&'static str, &'static str, Priority)] {
        match self {
            FixtureApp::Swag => swag::TABLE,
            FixtureApp::Medibox => medibox::TABLE,
        }
    }

    /// Published (total, passed) under the application's failure profile.
    pub fn expected_split(self) -> (usize, usize) {
        match self {
            FixtureApp::Swag => (10, 9),
            FixtureApp::Medibox => (10, 7),
        }
    }

    pub fn expected_failures(self) -> &'static [&'static str] {
        match self {
            FixtureApp::Swag => &["TC07"],
            FixtureApp::Medibox => &["TC01", "TC06", "TC10"],
        }
    }
}

/// One request as the fixture sees it: path, decoded query and form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureRequest {
    pub method: Method,
    pub path: String,
    pub query: Vec<(String, String)>,
    pub form: Vec<(String, String)>,
}

impl FixtureRequest {
    pub fn get(path_and_query: &str) -> Self {
        let (path, query) = path_and_query.split_once('?').unwrap_or((path_and_query, ""));
        Self {
            method: Method::Get,
            path: path.to_string(),
            query: url::form_urlencoded::parse(query.as_bytes()).into_owned().collect(),
            form: Vec::new(),
        }
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.query.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn field(&self, name: &str) -> &str {
        self.form.iter().find(|(k, _)| k == name).map_or("", |(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureReply {
    pub status: u16,
    /// Redirect target (path), answered with 303.
    pub location: Option<String>,
    pub body: String,
    pub delay_ms: u64,
}

impl FixtureReply {
    fn page(body: String) -> Self {
        Self { status: 200, location: None, body, delay_ms: 0 }
    }

    fn redirect(location: impl Into<String>) -> Self {
        Self { status: 303, location: Some(location.into()), body: String::new(), delay_ms: 0 }
    }

    fn not_found(path: &str) -> Self {
        Self {
            status: 404,
            location: None,
            body: format!("<!DOCTYPE html><html><head><title>Not Found</title></head><body><h1>Not Found</h1><p>{}</p></body></html>", escape(path)),
            delay_ms: 0,
        }
    }

    fn delayed(mut self, ms: u64) -> Self {
        self.delay_ms = ms;
        self
    }
}

/// Accounts created during a run, over the seeded ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureState {
    pub emails: BTreeSet<String>,
    pub mobiles: BTreeSet<String>,
    pub passwords: BTreeMap<String, String>,
}

impl FixtureState {
    fn seeded(app: FixtureApp) -> Self {
        let mut state = Self { emails: BTreeSet::new(), mobiles: BTreeSet::new(), passwords: BTreeMap::new() };
        if app == FixtureApp::Medibox {
            for (email, mobile, password) in medibox::SEEDED_ACCOUNTS {
                state.emails.insert(email.to_string());
                state.mobiles.insert(mobile.to_string());
                state.passwords.insert(email.to_string(), password.to_string());
            }
        }
        state
    }
}

/// An application under one failure profile. Responses depend only on the
/// request, the profile and the account store.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub app: FixtureApp,
    pub profile: FailureProfile,
    state: Arc<Mutex<FixtureState>>,
}

impl Fixture {
    pub fn new(app: FixtureApp, profile: FailureProfile) -> Self {
        Self { app, profile, state: Arc::new(Mutex::new(FixtureState::seeded(app))) }
    }

    /// Forgets accounts registered since the fixture was created.
    pub fn reset(&self) {
        *self.state.lock().expect("fixture state") = FixtureState::seeded(self.app);
    }

    pub fn state(&self) -> FixtureState {
        self.state.lock().expect("fixture state").clone()
    }

    pub fn handle(&self, request: &FixtureRequest) -> FixtureReply {
        match self.app {
            FixtureApp::Swag => swag::handle(self.profile, request),
            FixtureApp::Medibox => {
                let mut state = self.state.lock().expect("fixture state");
                medibox::handle(self.profile, &mut state, request)
            }
        }
    }
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// A transcript bundle is the archive as one JSON array of entries.
pub fn archive_from_bundle(json: &str) -> Result<TranscriptArchive, LlmError> {
    let entries: Vec<TranscriptEntry> =
        serde_json::from_str(json).map_err(|e| LlmError::Archive(format!("transcript bundle: {e}")))?;
    let mut archive = TranscriptArchive::new();
    for entry in entries {
        let key = archive.key(&entry.messages);
        if key != entry.digest {
            return Err(LlmError::Archive(format!("bundle entry {} has digest {key}", entry.digest)));
        }
        archive.insert(&entry.messages, &entry.response)?;
    }
    Ok(archive)
}

pub fn bundle_from_archive(archive: &TranscriptArchive) -> String {
    let entries: Vec<&TranscriptEntry> = archive.entries().collect();
    let mut text = serde_json::to_string_pretty(&entries).expect("entries serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests;
