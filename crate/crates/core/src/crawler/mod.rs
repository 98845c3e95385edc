//! Phase 1 input: breadth-first capture of the target application.

mod fetch;
mod normalize;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

pub use fetch::{FetchError, FetchedPage, Fetcher, HttpFetcher, StaticFetcher};
pub use normalize::{normalize_url, origin_of};

pub const DEFAULT_MAX_PAGES: usize = 50;
pub const DEFAULT_MAX_DEPTH: usize = 3;
pub const DEFAULT_USER_AGENT: &str = concat!("qeflow/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum CrawlError {
    #[error("malformed URL `{url}`: {reason}")]
    MalformedUrl { url: String, reason: String },
    #[error("invalid crawl config: {0}")]
    InvalidConfig(String),
    #[error("root page {url} unreachable: {reason}")]
    RootUnreachable { url: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlConfig {
    pub base_url: String,
    pub max_pages: usize,
    pub max_depth: usize,
    pub same_origin_only: bool,
    pub fetch_timeout_ms: u64,
    pub parallelism: usize,
    pub user_agent: String,
}

impl CrawlConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            max_pages: DEFAULT_MAX_PAGES,
            max_depth: DEFAULT_MAX_DEPTH,
            same_origin_only: true,
            fetch_timeout_ms: 10_000,
            parallelism: 4,
            user_agent: DEFAULT_USER_AGENT.to_string(),
        }
    }

    /// Checks the invariants and returns the normalized base URL.
    pub fn validate(&self) -> Result<String, CrawlError> {
        let parsed = Url::parse(&self.base_url).map_err(|e| CrawlError::MalformedUrl {
            url: self.base_url.clone(),
            reason: e.to_string(),
        })?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(CrawlError::InvalidConfig(format!(
                "base_url must use http or https, got `{}`",
                parsed.scheme()
            )));
        }
        if self.max_pages == 0 {
            return Err(CrawlError::InvalidConfig("max_pages must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(CrawlError::InvalidConfig("parallelism must be at least 1".into()));
        }
        normalize_url(&self.base_url, &self.base_url)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageCapture {
    pub url: String,
    pub fetched_at: DateTime<Utc>,
    /// HTTP status, or 0 when the request never completed.
    pub status: u16,
    pub html: String,
    pub discovered_links: Vec<String>,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PageCapture {
    pub fn is_ok(&self) -> bool {
        self.error.is_none() && (200..300).contains(&self.status)
    }
}

/// Crawls breadth-first from `config.base_url`.
///
/// Within a depth level URLs are fetched in lexicographic order (up to
/// `parallelism` at a time) and merged back in that order, so the result only
/// depends on what the server returns.
pub fn crawl(config: &CrawlConfig, fetcher: &dyn Fetcher) -> Result<Vec<PageCapture>, CrawlError> {
    let base = config.validate()?;
    let base_origin = origin_of(&base);

    let mut seen = BTreeSet::from([base.clone()]);
    let mut frontier = vec![base.clone()];
    let mut captures: Vec<PageCapture> = Vec::new();
    let mut depth = 0usize;

    while !frontier.is_empty() && captures.len() < config.max_pages {
        frontier.sort();
        frontier.truncate(config.max_pages - captures.len());
        let fetched = fetch_level(&frontier, fetcher, config.parallelism);

        let mut next = BTreeSet::new();
        for (url, result) in frontier.iter().zip(fetched) {
            let capture = into_capture(url, depth, result);
            if depth == 0 && !capture.is_ok() {
                return Err(CrawlError::RootUnreachable {
                    url: url.clone(),
                    reason: capture
                        .error
                        .clone()
                        .unwrap_or_else(|| format!("HTTP {}", capture.status)),
                });
            }
            if depth < config.max_depth {
                for link in &capture.discovered_links {
                    if config.same_origin_only && origin_of(link) != base_origin {
                        continue;
                    }
                    if seen.insert(link.clone()) {
                        next.insert(link.clone());
                    }
                }
            }
            captures.push(capture);
        }
        frontier = next.into_iter().collect();
        depth += 1;
    }
    Ok(captures)
}

fn fetch_level(
    urls: &[String],
    fetcher: &dyn Fetcher,
    parallelism: usize,
) -> Vec<Result<FetchedPage, FetchError>> {
    let mut results = Vec::with_capacity(urls.len());
    for batch in urls.chunks(parallelism) {
        if batch.len() == 1 {
            results.push(fetcher.fetch(&batch[0]));
            continue;
        }
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|url| scope.spawn(move || fetcher.fetch(url)))
                .collect();
            for (handle, url) in handles.into_iter().zip(batch) {
                results.push(handle.join().unwrap_or_else(|_| {
                    Err(FetchError {
                        url: url.clone(),
                        reason: "fetcher panicked".into(),
                    })
                }));
            }
        });
    }
    results
}

fn into_capture(url: &str, depth: usize, result: Result<FetchedPage, FetchError>) -> PageCapture {
    let fetched_at = Utc::now();
    match result {
        Ok(page) => {
            let ok = (200..300).contains(&page.status);
            let discovered_links = if ok {
                crate::dom::extract_links(&page.body, url)
            } else {
                Vec::new()
            };
            PageCapture {
                url: url.to_string(),
                fetched_at,
                status: page.status,
                html: page.body,
                discovered_links,
                depth,
                error: (!ok).then(|| format!("HTTP {}", page.status)),
            }
        }
        Err(e) => PageCapture {
            url: url.to_string(),
            fetched_at,
            status: 0,
            html: String::new(),
            discovered_links: Vec::new(),
            depth,
            error: Some(e.reason),
        },
    }
}
