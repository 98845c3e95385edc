use url::Url;

use super::CrawlError;

/// Resolves `raw` against `base` and normalizes the result.
///
/// The fragment and default port are dropped, trailing slashes are collapsed
/// (except for the root path), percent-escapes in the path are upper-cased and
/// the query is kept as parsed.
pub fn normalize_url(raw: &str, base: &str) -> Result<String, CrawlError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(CrawlError::MalformedUrl {
            url: raw.to_string(),
            reason: "empty URL".into(),
        });
    }
    let base_url = Url::parse(base).map_err(|e| CrawlError::MalformedUrl {
        url: base.to_string(),
        reason: format!("base is not an absolute URL: {e}"),
    })?;
    let mut url = base_url.join(raw).map_err(|e| CrawlError::MalformedUrl {
        url: raw.to_string(),
        reason: e.to_string(),
    })?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(CrawlError::MalformedUrl {
            url: raw.to_string(),
            reason: format!("unsupported scheme `{}`", url.scheme()),
        });
    }
    if url.host_str().map_or(true, str::is_empty) {
        return Err(CrawlError::MalformedUrl {
            url: raw.to_string(),
            reason: "missing host".into(),
        });
    }
    url.set_fragment(None);
    let path = collapse_trailing_slashes(&fold_percent_escapes(url.path()));
    url.set_path(&path);
    Ok(url.to_string())
}

/// Origin (`scheme://host[:port]`) of an absolute URL.
pub fn origin_of(url: &str) -> Option<String> {
    let parsed = Url::parse(url).ok()?;
    Some(parsed.origin().ascii_serialization())
}

fn fold_percent_escapes(path: &str) -> String {
    let bytes = path.as_bytes();
    let mut out = String::with_capacity(path.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%'
            && i + 2 < bytes.len()
            && bytes[i + 1].is_ascii_hexdigit()
            && bytes[i + 2].is_ascii_hexdigit()
        {
            out.push('%');
            out.push(bytes[i + 1].to_ascii_uppercase() as char);
            out.push(bytes[i + 2].to_ascii_uppercase() as char);
            i += 3;
        } else {
            // path() is ASCII after URL parsing
            out.push(bytes[i] as char);
            i += 1;
        }
    }
    out
}

fn collapse_trailing_slashes(path: &str) -> String {
    let trimmed = path.trim_end_matches('/');
    if trimmed.is_empty() {
        "/".to_string()
    } else {
        trimmed.to_string()
    }
}
