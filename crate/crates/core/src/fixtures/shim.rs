//! A loopback WebDriver endpoint backed by the simulated session over a
//! fixture. It speaks the W3C subset the WebDriver client uses, so the
//! client's protocol path runs without a browser.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

use super::{Fixture, FixtureError, FixtureTransport};
use crate::exec::{ActionCommand, Session, SimulatedSession, StepError, DEFAULT_TIMEOUT_MS};
use crate::testgen::Verb;

const ELEMENT_KEY: &str = "element-6066-11e4-a52e-4f735466cecf";
const POLL: Duration = Duration::from_millis(50);

struct Live {
    id: String,
    session: SimulatedSession,
    implicit_ms: u64,
    page_load_ms: u64,
}

struct State {
    fixture: Fixture,
    next_id: AtomicU64,
    live: Mutex<Option<Live>>,
}

pub struct WebDriverShim {
    endpoint: String,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl WebDriverShim {
    /// One session at a time; each new session starts from the fixture's
    /// current account store.
    pub fn start(fixture: Fixture) -> Result<Self, FixtureError> {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(|e| FixtureError::PortUnavailable(e.to_string()))?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| FixtureError::PortUnavailable("listener has no IP address".into()))?;
        let state = State { fixture, next_id: AtomicU64::new(1), live: Mutex::new(None) };
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let worker = std::thread::spawn(move || {
            while !flag.load(Ordering::SeqCst) {
                match server.recv_timeout(POLL) {
                    Ok(Some(request)) => respond(&state, request),
                    Ok(None) => {}
                    Err(e) => {
                        log::warn!("webdriver shim: {e}");
                        break;
                    }
                }
            }
        });
        Ok(Self { endpoint: format!("http://127.0.0.1:{port}"), stop, worker: Some(worker) })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Drop for WebDriverShim {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

type Reply = (u16, Value);

fn ok(value: Value) -> Reply {
    (200, json!({ "value": value }))
}

fn protocol_error(status: u16, code: &str, message: impl Into<String>) -> Reply {
    (status, json!({"value": {"error": code, "message": message.into(), "stacktrace": ""}}))
}

fn step_error(error: StepError) -> Reply {
    match error {
        StepError::ElementNotFound(m) => protocol_error(404, "no such element", m),
        StepError::NotInteractable(m) => protocol_error(400, "element not interactable", m),
        StepError::Timeout { what, waited_ms } => protocol_error(500, "timeout", format!("{what} after {waited_ms} ms")),
        StepError::SessionLost(m) => protocol_error(404, "invalid session id", m),
        other => protocol_error(500, "unknown error", other.to_string()),
    }
}

fn respond(state: &State, mut request: tiny_http::Request) {
    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);
    let body: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
    let method = request.method().as_str().to_ascii_uppercase();
    let path = request.url().split('?').next().unwrap_or_default().to_string();
    let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    let (status, value) = route(state, &method, &segments, &body);
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json; charset=utf-8").expect("static header");
    let response = tiny_http::Response::from_string(value.to_string()).with_status_code(status).with_header(header);
    if let Err(e) = request.respond(response) {
        log::debug!("webdriver shim reply not delivered: {e}");
    }
}

fn command(verb: Verb, locator: Option<String>, payload: Option<String>, timeout_ms: u64) -> ActionCommand {
    ActionCommand { verb, resolved_locator: locator, payload, timeout_ms, page: String::new(), element_id: None }
}

fn element_locator(handle: &str) -> Option<String> {
    hex::decode(handle).ok().and_then(|b| String::from_utf8(b).ok())
}

fn route(state: &State, method: &str, segments: &[&str], body: &Value) -> Reply {
    match (method, segments) {
        ("GET", ["status"]) => ok(json!({"ready": true, "message": "qeflow fixture shim"})),
        ("POST", ["session"]) => {
            let id = format!("shim-{}", state.next_id.fetch_add(1, Ordering::SeqCst));
            let transport = FixtureTransport::new(state.fixture.clone());
            let session = SimulatedSession::new(Box::new(transport), format!("shim:{}", state.fixture.app));
            *state.live.lock().expect("shim state") =
                Some(Live { id: id.clone(), session, implicit_ms: 0, page_load_ms: DEFAULT_TIMEOUT_MS });
            ok(json!({"sessionId": id, "capabilities": {"browserName": "qeflow-shim"}}))
        }
        (_, ["session", id, rest @ ..]) => {
            let mut guard = state.live.lock().expect("shim state");
            let Some(live) = guard.as_mut().filter(|l| l.id == *id) else {
                return protocol_error(404, "invalid session id", format!("no session {id}"));
            };
            if method == "DELETE" && rest.is_empty() {
                *guard = None;
                return ok(Value::Null);
            }
            session_command(live, method, rest, body)
        }
        _ => protocol_error(404, "unknown command", format!("{method} /{}", segments.join("/"))),
    }
}

fn session_command(live: &mut Live, method: &str, rest: &[&str], body: &Value) -> Reply {
    let text = |key: &str| body.get(key).and_then(Value::as_str).map(str::to_string);
    let result: Result<Value, StepError> = match (method, rest) {
        ("POST", ["timeouts"]) => {
            if let Some(ms) = body.get("implicit").and_then(Value::as_u64) {
                live.implicit_ms = ms;
            }
            if let Some(ms) = body.get("pageLoad").and_then(Value::as_u64) {
                live.page_load_ms = ms;
            }
            Ok(Value::Null)
        }
        ("POST", ["url"]) => {
            let Some(url) = text("url") else {
                return protocol_error(400, "invalid argument", "missing url");
            };
            live.session
                .execute(&command(Verb::Navigate, None, Some(url), live.page_load_ms))
                .map(|()| Value::Null)
        }
        ("GET", ["url"]) => Ok(json!(live.session.current_url().unwrap_or("about:blank"))),
        ("GET", ["title"]) => Ok(json!(live.session.title().unwrap_or_default())),
        ("DELETE", ["cookie"]) => live.session.reset().map(|()| Value::Null),
        ("GET", ["screenshot"]) => return protocol_error(500, "unsupported operation", "the shim renders no pixels"),
        ("POST", ["element"]) => {
            let (Some("css selector"), Some(locator)) = (body.get("using").and_then(Value::as_str), text("value")) else {
                return protocol_error(400, "invalid argument", "only css selector lookups are supported");
            };
            live.session
                .locate(&locator, live.implicit_ms)
                .map(|()| json!({ ELEMENT_KEY: hex::encode(locator.as_bytes()) }))
        }
        (_, ["element", handle, action]) => {
            let Some(locator) = element_locator(handle) else {
                return protocol_error(404, "no such element", format!("unknown element {handle}"));
            };
            let wait = live.implicit_ms;
            let load = live.page_load_ms;
            match (method, *action) {
                ("POST", "click") => live
                    .session
                    .execute(&command(Verb::Click, Some(locator), None, load))
                    .map(|()| Value::Null),
                ("POST", "value") => {
                    let typed = text("text").unwrap_or_default();
                    live.session
                        .execute(&command(Verb::Type, Some(locator), Some(typed), wait))
                        .map(|()| Value::Null)
                }
                ("POST", "clear") => live
                    .session
                    .execute(&command(Verb::Clear, Some(locator), None, wait))
                    .map(|()| Value::Null),
                ("GET", "text") => live.session.element_text(&locator, wait).map(Value::from),
                ("GET", "displayed") => live.session.element_displayed(&locator, wait).map(Value::from),
                ("GET", "rect") => match live.session.geometry(&locator) {
                    Some(g) => Ok(json!({"x": g.x, "y": g.y, "width": g.width, "height": g.height})),
                    None => Err(StepError::ElementNotFound(format!("{locator} has no box"))),
                },
                _ => return protocol_error(404, "unknown command", format!("{method} element/{action}")),
            }
        }
        _ => return protocol_error(404, "unknown command", format!("{method} {}", rest.join("/"))),
    };
    match result {
        Ok(value) => ok(value),
        Err(e) => step_error(e),
    }
}
