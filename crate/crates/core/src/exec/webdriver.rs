//! W3C WebDriver client session.

use std::time::Duration;

use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::session::{Session, StepError};
use super::ActionCommand;
use crate::dom::Geometry;
use crate::testgen::Verb;

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";
/// Slack on top of the command timeout before the HTTP call itself gives up.
const TRANSPORT_SLACK_MS: u64 = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebDriverConfig {
    pub endpoint: String,
    /// Sent as `capabilities.alwaysMatch`.
    #[serde(default = "default_capabilities")]
    pub capabilities: Value,
}

fn default_capabilities() -> Value {
    json!({
        "browserName": "chrome",
        "goog:chromeOptions": {"args": ["--headless=new", "--no-sandbox"]},
        "moz:firefoxOptions": {"args": ["-headless"]}
    })
}

impl WebDriverConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), capabilities: default_capabilities() }
    }
}

pub struct WebDriverSession {
    agent: ureq::Agent,
    endpoint: String,
    session_id: String,
    browser: String,
    timeouts: Option<u64>,
}

fn lost(reason: impl std::fmt::Display) -> StepError {
    StepError::SessionLost(reason.to_string())
}

impl WebDriverSession {
    pub fn connect(config: &WebDriverConfig) -> Result<Self, StepError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let endpoint = config.endpoint.trim_end_matches('/').to_string();
        let body = json!({"capabilities": {"alwaysMatch": config.capabilities}});
        let value = call(&agent, "POST", &format!("{endpoint}/session"), Some(&body), 60_000)?;
        let session_id = value
            .get("sessionId")
            .and_then(Value::as_str)
            .ok_or_else(|| lost("new session reply carried no sessionId"))?
            .to_string();
        let browser = value
            .pointer("/capabilities/browserName")
            .and_then(Value::as_str)
            .unwrap_or("unknown")
            .to_string();
        Ok(Self { agent, endpoint, session_id, browser, timeouts: None })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/session/{}{path}", self.endpoint, self.session_id)
    }

    fn post(&self, path: &str, body: Value, timeout_ms: u64) -> Result<Value, StepError> {
        call(&self.agent, "POST", &self.url(path), Some(&body), timeout_ms + TRANSPORT_SLACK_MS)
    }

    fn get(&self, path: &str, timeout_ms: u64) -> Result<Value, StepError> {
        call(&self.agent, "GET", &self.url(path), None, timeout_ms + TRANSPORT_SLACK_MS)
    }

    fn set_timeouts(&mut self, ms: u64) -> Result<(), StepError> {
        if self.timeouts != Some(ms) {
            self.post("/timeouts", json!({"implicit": ms, "pageLoad": ms, "script": ms}), ms)?;
            self.timeouts = Some(ms);
        }
        Ok(())
    }

    fn find(&self, locator: &str, timeout_ms: u64) -> Result<String, StepError> {
        let value = self.post("/element", json!({"using": "css selector", "value": locator}), timeout_ms)?;
        value
            .get(ELEMENT_KEY)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| StepError::Other(format!("find {locator}: malformed element reference")))
    }

    fn with_context(error: StepError, locator: &str, timeout_ms: u64) -> StepError {
        match error {
            StepError::ElementNotFound(_) => StepError::ElementNotFound(format!("{locator} (waited {timeout_ms} ms)")),
            StepError::NotInteractable(m) => StepError::NotInteractable(format!("{locator}: {m}")),
            other => other,
        }
    }

    fn run(&mut self, command: &ActionCommand) -> Result<(), StepError> {
        let t = command.timeout_ms;
        self.set_timeouts(t)?;
        let payload = || {
            command
                .payload
                .clone()
                .ok_or_else(|| StepError::Other(format!("{} needs a payload", command.verb)))
        };
        let loc = command.resolved_locator.as_deref().unwrap_or_default();
        match command.verb {
            Verb::Navigate => self.post("/url", json!({"url": payload()?}), t).map(drop),
            Verb::AssertUrl => {
                let expected = payload()?;
                let current = self.get("/url", t)?.as_str().unwrap_or_default().to_string();
                let normalize = |u: &str| crate::crawler::normalize_url(u, u).ok();
                if normalize(&expected) == normalize(&current) {
                    Ok(())
                } else {
                    Err(StepError::AssertionFailed(format!("expected URL {expected}, at {current}")))
                }
            }
            Verb::Wait if command.resolved_locator.is_none() => {
                let ms = command.payload.as_deref().and_then(|p| p.trim().parse().ok()).unwrap_or(1_000);
                std::thread::sleep(Duration::from_millis(ms));
                Ok(())
            }
            Verb::Wait => self.find(loc, t).map(drop),
            Verb::Click => {
                let el = self.find(loc, t)?;
                self.post(&format!("/element/{el}/click"), json!({}), t).map(drop)
            }
            Verb::Type => {
                let el = self.find(loc, t)?;
                self.post(&format!("/element/{el}/value"), json!({"text": payload()?}), t).map(drop)
            }
            Verb::Clear => {
                let el = self.find(loc, t)?;
                self.post(&format!("/element/{el}/clear"), json!({}), t).map(drop)
            }
            Verb::Select => {
                let wanted = payload()?;
                self.find(loc, t)?;
                let escaped = wanted.replace('\\', "\\\\").replace('"', "\\\"");
                let option = self
                    .find(&format!("{loc} option[value=\"{escaped}\"]"), t)
                    .map_err(|_| StepError::ElementNotFound(format!("option \"{wanted}\" in {loc}")))?;
                self.post(&format!("/element/{option}/click"), json!({}), t).map(drop)
            }
            Verb::AssertText => {
                let expected = payload()?;
                let expected = expected.trim();
                // the title element is never rendered, so read the document title
                let text = if loc == "title" || loc.ends_with(" > title") {
                    self.get("/title", t)?
                } else {
                    let el = self.find(loc, t)?;
                    self.get(&format!("/element/{el}/text"), t)?
                };
                let text = text.as_str().unwrap_or_default();
                if text.contains(expected) {
                    Ok(())
                } else {
                    Err(StepError::AssertionFailed(format!("expected \"{expected}\" in {loc}, found \"{text}\"")))
                }
            }
            Verb::AssertVisible => {
                let el = self.find(loc, t)?;
                if self.get(&format!("/element/{el}/displayed"), t)?.as_bool() == Some(true) {
                    Ok(())
                } else {
                    Err(StepError::AssertionFailed(format!("{loc} is not visible")))
                }
            }
        }
        .map_err(|e| Self::with_context(e, loc, t))
    }
}

/// One WebDriver command. Transport failures and invalid sessions are
/// session losses; protocol errors map onto step errors.
fn call(agent: &ureq::Agent, method: &str, url: &str, body: Option<&Value>, timeout_ms: u64) -> Result<Value, StepError> {
    let timeout = Some(Duration::from_millis(timeout_ms));
    let result = match (method, body) {
        ("GET", _) => agent.get(url).config().timeout_global(timeout).build().call(),
        ("DELETE", _) => agent.delete(url).config().timeout_global(timeout).build().call(),
        (_, Some(body)) => agent.post(url).config().timeout_global(timeout).build().send_json(body),
        (_, None) => agent.post(url).config().timeout_global(timeout).build().send_empty(),
    };
    let mut response = result.map_err(|e| match e {
        ureq::Error::Timeout(_) => StepError::Timeout { what: format!("WebDriver {method} {url}"), waited_ms: timeout_ms },
        other => lost(format!("WebDriver endpoint unreachable: {other}")),
    })?;
    let ok = response.status().is_success();
    let text = response.body_mut().read_to_string().map_err(lost)?;
    let reply: Value = serde_json::from_str(&text).map_err(|e| lost(format!("malformed WebDriver reply: {e}")))?;
    let value = reply.get("value").cloned().unwrap_or(Value::Null);
    if ok {
        return Ok(value);
    }
    let code = value.get("error").and_then(Value::as_str).unwrap_or("unknown error");
    let message = value.get("message").and_then(Value::as_str).unwrap_or_default().to_string();
    Err(match code {
        "no such element" | "stale element reference" => StepError::ElementNotFound(message),
        "element not interactable" | "element click intercepted" | "invalid element state" => {
            StepError::NotInteractable(format!("{code}: {message}"))
        }
        "timeout" | "script timeout" => StepError::Timeout { what: message, waited_ms: timeout_ms },
        "invalid session id" | "session not created" => lost(format!("{code}: {message}")),
        _ => StepError::Other(format!("{code}: {message}")),
    })
}

impl Session for WebDriverSession {
    fn describe(&self) -> String {
        format!("webdriver:{} at {}", self.browser, self.endpoint)
    }

    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn execute(&mut self, command: &ActionCommand) -> Result<(), StepError> {
        self.run(command)
    }

    fn reset(&mut self) -> Result<(), StepError> {
        call(&self.agent, "DELETE", &self.url("/cookie"), None, 10_000).map(drop)
    }

    fn geometry(&mut self, locator: &str) -> Option<Geometry> {
        let el = self.find(locator, 1_000).ok()?;
        let rect = self.get(&format!("/element/{el}/rect"), 1_000).ok()?;
        let f = |k: &str| rect.get(k).and_then(Value::as_f64);
        Some(Geometry { x: f("x")?, y: f("y")?, width: f("width")?, height: f("height")? })
    }

    fn screenshot(&mut self) -> Option<Vec<u8>> {
        let encoded = self.get("/screenshot", 10_000).ok()?;
        base64::engine::general_purpose::STANDARD.decode(encoded.as_str()?).ok()
    }

    fn is_live(&self) -> bool {
        true
    }

    fn close(&mut self) {
        if let Err(e) = call(&self.agent, "DELETE", &self.url(""), None, 10_000) {
            log::warn!("closing WebDriver session: {e}");
        }
    }
}
