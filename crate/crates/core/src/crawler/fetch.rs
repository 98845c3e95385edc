use std::collections::BTreeMap;
use std::time::Duration;

/// Outcome of a successful HTTP exchange (any status code).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedPage {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("fetch of {url} failed: {reason}")]
pub struct FetchError {
    pub url: String,
    pub reason: String,
}

/// Page source used by the crawler. Swapping the implementation is how a
/// rendering fetcher (headless browser) or an in-process fixture plugs in.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError>;
}

/// Plain HTTP GET fetcher.
pub struct HttpFetcher {
    agent: ureq::Agent,
    user_agent: String,
}

impl HttpFetcher {
    pub fn new(timeout: Duration, user_agent: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: config.into(),
            user_agent: user_agent.into(),
        }
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError> {
        let fail = |reason: String| FetchError {
            url: url.to_string(),
            reason,
        };
        let mut response = self
            .agent
            .get(url)
            .header("User-Agent", &self.user_agent)
            .call()
            .map_err(|e| fail(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| fail(e.to_string()))?;
        Ok(FetchedPage { status, body })
    }
}

/// In-memory fetcher keyed by normalized URL; unknown URLs answer 404.
#[derive(Debug, Default, Clone)]
pub struct StaticFetcher {
    pages: BTreeMap<String, FetchedPage>,
}

impl StaticFetcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_page(mut self, url: impl Into<String>, html: impl Into<String>) -> Self {
        self.insert(url, 200, html);
        self
    }

    pub fn insert(&mut self, url: impl Into<String>, status: u16, html: impl Into<String>) {
        self.pages.insert(
            url.into(),
            FetchedPage {
                status,
                body: html.into(),
            },
        );
    }
}

impl Fetcher for StaticFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedPage, FetchError> {
        Ok(self.pages.get(url).cloned().unwrap_or(FetchedPage {
            status: 404,
            body: String::new(),
        }))
    }
}
