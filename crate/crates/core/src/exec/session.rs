//! The session contract shared by the simulated and WebDriver sessions,
//! and the HTTP transport the simulated session drives.

use std::time::Duration;

use chrono::{DateTime, Utc};
use ureq::ResponseExt;

use super::ActionCommand;
use crate::dom::Geometry;

/// Why a step did not pass. The message text carries the keywords the
/// failure categorizer keys on.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("timeout after {waited_ms} ms: {what}")]
    Timeout { what: String, waited_ms: u64 },
    #[error("element not found: {0}")]
    ElementNotFound(String),
    #[error("element not interactable: {0}")]
    NotInteractable(String),
    #[error("assertion failed: {0}")]
    AssertionFailed(String),
    #[error("server error: HTTP {status} from {url}")]
    Server { status: u16, url: String },
    #[error("session lost: {0}")]
    SessionLost(String),
    #[error("{0}")]
    Other(String),
}

impl StepError {
    /// Errors (as opposed to failures) mean the step could not be judged.
    pub fn is_error(&self) -> bool {
        matches!(self, StepError::SessionLost(_) | StepError::Other(_))
    }
}

pub trait Session {
    /// Environment descriptor recorded in the run result.
    fn describe(&self) -> String;
    /// Session clock; virtual for the simulator.
    fn now(&self) -> DateTime<Utc>;
    fn execute(&mut self, command: &ActionCommand) -> Result<(), StepError>;
    /// Drops page and field state before a case starts.
    fn reset(&mut self) -> Result<(), StepError>;
    fn geometry(&mut self, locator: &str) -> Option<Geometry>;
    fn screenshot(&mut self) -> Option<Vec<u8>>;
    /// Live sessions capture screenshots of failed element assertions.
    fn is_live(&self) -> bool {
        false
    }
    fn close(&mut self) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub form: Vec<(String, String)>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self { method: Method::Get, url: url.into(), form: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Final URL after redirects.
    pub url: String,
    pub body: String,
    /// Server think time, charged to the virtual clock. Real transports
    /// report zero because the wait already happened.
    pub delay_ms: u64,
}

/// Where the simulated session sends its requests: a real HTTP server or
/// an in-process application.
pub trait Transport: Send {
    fn send(&mut self, request: &HttpRequest, timeout_ms: u64) -> Result<HttpResponse, StepError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl Default for HttpTransport {
    fn default() -> Self {
        let config = ureq::Agent::config_builder().http_status_as_error(false).build();
        Self { agent: config.into() }
    }
}

impl Transport for HttpTransport {
    fn send(&mut self, request: &HttpRequest, timeout_ms: u64) -> Result<HttpResponse, StepError> {
        let timeout = Some(Duration::from_millis(timeout_ms));
        let result = match request.method {
            Method::Get => self.agent.get(&request.url).config().timeout_global(timeout).build().call(),
            Method::Post => self
                .agent
                .post(&request.url)
                .config()
                .timeout_global(timeout)
                .build()
                .send_form(request.form.iter().map(|(k, v)| (k.as_str(), v.as_str()))),
        };
        let mut response = result.map_err(|e| match e {
            ureq::Error::Timeout(_) => StepError::Timeout { what: format!("response from {}", request.url), waited_ms: timeout_ms },
            other => StepError::Other(format!("request to {} failed: {other}", request.url)),
        })?;
        let url = response.get_uri().to_string();
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| StepError::Other(format!("reading {}: {e}", request.url)))?;
        Ok(HttpResponse { status, url, body, delay_ms: 0 })
    }
}
