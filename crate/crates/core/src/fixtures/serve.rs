//! Ways to reach a fixture: in process (transport and crawl fetcher) or
//! over loopback HTTP.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use url::Url;

use super::{FailureProfile, Fixture, FixtureApp, FixtureError, FixtureReply, FixtureRequest};
use crate::crawler::{FetchError, FetchedPage, Fetcher};
use crate::exec::{HttpRequest, HttpResponse, Method, StepError, Transport};

const MAX_REDIRECTS: usize = 5;
const WORKERS: usize = 4;
const POLL: Duration = Duration::from_millis(50);

/// Answers one request, following redirects as a browser would (303 turns
/// a POST into a GET). Returns the final URL, the last reply and the summed
/// server delay.
fn exchange(fixture: &Fixture, base: &Url, mut request: FixtureRequest) -> Result<(String, FixtureReply, u64), String> {
    let mut delay = 0;
    for _ in 0..=MAX_REDIRECTS {
        let reply = fixture.handle(&request);
        delay += reply.delay_ms;
        let Some(location) = reply.location.clone() else {
            let mut url = base.join(&request.path).map_err(|e| e.to_string())?;
            if !request.query.is_empty() {
                url.query_pairs_mut().extend_pairs(request.query.iter());
            }
            return Ok((url.to_string(), reply, delay));
        };
        request = FixtureRequest::get(&location);
    }
    Err(format!("more than {MAX_REDIRECTS} redirects"))
}

/// Splits an absolute URL into a fixture request, refusing other origins.
fn fixture_request(base: &Url, raw: &str, method: Method, form: Vec<(String, String)>) -> Result<FixtureRequest, String> {
    let url = Url::parse(raw).map_err(|e| format!("{raw}: {e}"))?;
    if url.origin() != base.origin() {
        return Err(format!("{raw} is outside the fixture origin {base}"));
    }
    Ok(FixtureRequest {
        method,
        path: url.path().to_string(),
        query: url.query_pairs().into_owned().collect(),
        form,
    })
}

/// In-process transport for the simulated session. Server think time is
/// reported, not slept, so profiles cost no wall time.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    fixture: Fixture,
    base: Url,
}

impl FixtureTransport {
    pub fn new(fixture: Fixture) -> Self {
        let base = Url::parse(fixture.app.base_url()).expect("fixture base URL parses");
        Self { fixture, base }
    }

    pub fn fixture(&self) -> &Fixture {
        &self.fixture
    }
}

impl Transport for FixtureTransport {
    fn send(&mut self, request: &HttpRequest, _timeout_ms: u64) -> Result<HttpResponse, StepError> {
        let first = fixture_request(&self.base, &request.url, request.method, request.form.clone())
            .map_err(StepError::Other)?;
        let (url, reply, delay_ms) = exchange(&self.fixture, &self.base, first).map_err(StepError::Other)?;
        Ok(HttpResponse { status: reply.status, url, body: reply.body, delay_ms })
    }
}

/// Crawl fetcher over the fixture without failure injection, so every
/// profile sees the same site.
#[derive(Debug, Clone)]
pub struct FixtureFetcher {
    fixture: Fixture,
    base: Url,
}

impl FixtureFetcher {
    pub fn new(app: FixtureApp) -> Self {
        let base = Url::parse(app.base_url()).expect("fixture base URL parses");
        Self { fixture: Fixture::new(app, FailureProfile::None), base }
    }
}

impl Fetcher for FixtureFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError> {
        let fail = |reason: String| FetchError { url: url.to_string(), reason };
        let request = fixture_request(&self.base, url, Method::Get, Vec::new()).map_err(fail)?;
        let (_, reply, _) = exchange(&self.fixture, &self.base, request).map_err(fail)?;
        Ok(FetchedPage { status: reply.status, body: reply.body })
    }
}

/// A fixture listening on a loopback port. Dropping it stops the workers.
pub struct FixtureServer {
    base_url: String,
    fixture: Fixture,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl FixtureServer {
    /// `http://127.0.0.1:<port>/`
    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn fixture(&self) -> &Fixture {
        &self.fixture
    }

    /// The served URL for a path or an in-process fixture URL.
    pub fn rebase(&self, url: &str) -> String {
        rebase(url, self.fixture.app.base_url(), &self.base_url)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

/// Moves `url` from origin `from` to origin `to`; relative paths are joined
/// onto `to`, other URLs pass through.
pub(crate) fn rebase(url: &str, from: &str, to: &str) -> String {
    if let Some(rest) = url.strip_prefix(from) {
        return format!("{to}{rest}");
    }
    if url.starts_with('/') {
        return format!("{}{}", to.trim_end_matches('/'), url);
    }
    url.to_string()
}

fn parse_form(body: &str) -> Vec<(String, String)> {
    url::form_urlencoded::parse(body.as_bytes()).into_owned().collect()
}

fn serve_one(fixture: &Fixture, mut request: tiny_http::Request) {
    let method = match request.method() {
        tiny_http::Method::Get | tiny_http::Method::Head => Method::Get,
        tiny_http::Method::Post => Method::Post,
        _ => {
            let _ = request.respond(tiny_http::Response::empty(405));
            return;
        }
    };
    let mut body = String::new();
    if method == Method::Post && request.as_reader().read_to_string(&mut body).is_err() {
        let _ = request.respond(tiny_http::Response::empty(400));
        return;
    }
    let (path, query) = request.url().split_once('?').unwrap_or((request.url(), ""));
    let fixture_request = FixtureRequest {
        method,
        path: path.to_string(),
        query: parse_form(query),
        form: parse_form(&body),
    };
    let reply = fixture.handle(&fixture_request);
    if reply.delay_ms > 0 {
        std::thread::sleep(Duration::from_millis(reply.delay_ms));
    }
    let html = tiny_http::Header::from_bytes("Content-Type", "text/html; charset=utf-8").expect("static header");
    let mut response = tiny_http::Response::from_string(reply.body).with_status_code(reply.status).with_header(html);
    if let Some(location) = reply.location {
        response = response.with_header(tiny_http::Header::from_bytes("Location", location).expect("ascii location"));
    }
    if let Err(e) = request.respond(response) {
        log::debug!("fixture response not delivered: {e}");
    }
}

/// Serves `app` under `profile` on `127.0.0.1` at a free port. The account
/// store starts seeded and lives as long as the server.
pub fn serve_fixture(app: FixtureApp, profile: FailureProfile) -> Result<FixtureServer, FixtureError> {
    let server = tiny_http::Server::http("127.0.0.1:0").map_err(|e| FixtureError::PortUnavailable(e.to_string()))?;
    let port = server
        .server_addr()
        .to_ip()
        .map(|a| a.port())
        .ok_or_else(|| FixtureError::PortUnavailable("listener has no IP address".into()))?;
    let server = Arc::new(server);
    let fixture = Fixture::new(app, profile);
    let stop = Arc::new(AtomicBool::new(false));
    let workers = (0..WORKERS)
        .map(|_| {
            let (server, fixture, stop) = (Arc::clone(&server), fixture.clone(), Arc::clone(&stop));
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match server.recv_timeout(POLL) {
                        Ok(Some(request)) => serve_one(&fixture, request),
                        Ok(None) => {}
                        Err(e) => {
                            log::warn!("fixture server: {e}");
                            break;
                        }
                    }
                }
            })
        })
        .collect();
    Ok(FixtureServer { base_url: format!("http://127.0.0.1:{port}/"), fixture, stop, workers })
}
