//! URL pattern analysis: group URLs that differ only in dynamic path segments.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Numeric,
    Uuid,
    Slug,
    Opaque,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Numeric => "numeric",
            SegmentKind::Uuid => "uuid",
            SegmentKind::Slug => "slug",
            SegmentKind::Opaque => "opaque",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicSegment {
    pub position: usize,
    pub inferred_kind: SegmentKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlPattern {
    /// Path template, e.g. `/users/{numeric}`.
    pub template: String,
    pub member_urls: Vec<String>,
    pub dynamic_segments: Vec<DynamicSegment>,
}

impl UrlPattern {
    /// True when `url`'s path matches the template with placeholders as wildcards.
    pub fn matches(&self, url: &str) -> bool {
        let template: Vec<&str> = split_path(&self.template);
        let Some(path) = path_of(url) else { return false };
        let segments = split_path(&path);
        segments.len() == template.len()
            && segments
                .iter()
                .zip(&template)
                .all(|(s, t)| (t.starts_with('{') && t.ends_with('}')) || s == t)
    }
}

fn uuid_shape() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?i)[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$").unwrap()
    })
}

/// Classifies one path segment; `None` means a literal.
///
/// * numeric: all ASCII digits
/// * uuid: 8-4-4-4-12 hex groups
/// * slug: at least two `-`/`_`/`.`-separated alphanumeric tokens mixing
///   alphabetic and digit-bearing tokens (`post-2024-hello`)
/// * opaque: an unseparated token of 8+ characters mixing letters and
///   digits, or 16+ hex digits
pub fn classify_segment(segment: &str) -> Option<SegmentKind> {
    if segment.is_empty() {
        return None;
    }
    if segment.bytes().all(|b| b.is_ascii_digit()) {
        return Some(SegmentKind::Numeric);
    }
    if uuid_shape().is_match(segment) {
        return Some(SegmentKind::Uuid);
    }
    let tokens: Vec<&str> = segment.split(['-', '_', '.']).collect();
    if tokens.len() >= 2 && tokens.iter().all(|t| !t.is_empty() && t.bytes().all(|b| b.is_ascii_alphanumeric())) {
        let has_digit = tokens.iter().any(|t| t.bytes().any(|b| b.is_ascii_digit()));
        let has_alpha = tokens.iter().any(|t| t.bytes().all(|b| b.is_ascii_alphabetic()));
        return (has_digit && has_alpha).then_some(SegmentKind::Slug);
    }
    if segment.bytes().all(|b| b.is_ascii_alphanumeric()) {
        let letters = segment.bytes().any(|b| b.is_ascii_alphabetic());
        let digits = segment.bytes().any(|b| b.is_ascii_digit());
        if segment.len() >= 16 && segment.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Some(SegmentKind::Opaque);
        }
        if segment.len() >= 8 && letters && digits {
            return Some(SegmentKind::Opaque);
        }
    }
    None
}

pub(crate) fn path_of(url: &str) -> Option<String> {
    Url::parse(url).ok().map(|u| u.path().to_string())
}

fn split_path(path: &str) -> Vec<&str> {
    path.split('/').filter(|s| !s.is_empty()).collect()
}

/// Partitions `urls` into patterns. Two URLs share a pattern iff they have
/// the same origin and segment count and every position either holds equal
/// literals or dynamic segments on both sides. Patterns come out sorted by
/// template (then origin); members keep lexicographic order.
pub fn extract_url_patterns(urls: &[String]) -> Vec<UrlPattern> {
    let mut groups: BTreeMap<(String, String), Vec<(String, Vec<Option<SegmentKind>>)>> = BTreeMap::new();
    let mut sorted: Vec<&String> = urls.iter().collect();
    sorted.sort();
    sorted.dedup();
    for url in sorted {
        let Ok(parsed) = Url::parse(url) else { continue };
        let segments = split_path(parsed.path());
        let kinds: Vec<Option<SegmentKind>> = segments.iter().map(|s| classify_segment(s)).collect();
        let key: Vec<&str> = segments
            .iter()
            .zip(&kinds)
            .map(|(s, k)| if k.is_some() { "*" } else { s })
            .collect();
        let origin = parsed.origin().ascii_serialization();
        groups
            .entry((format!("/{}", key.join("/")), origin))
            .or_default()
            .push((url.clone(), kinds));
    }
    let mut patterns: Vec<UrlPattern> = groups
        .into_iter()
        .map(|((key, _), members)| {
            let mut dynamic_segments = Vec::new();
            let parts: Vec<String> = split_path(&key)
                .into_iter()
                .enumerate()
                .map(|(position, part)| {
                    if part != "*" {
                        return part.to_string();
                    }
                    let first = members[0].1[position].expect("dynamic position");
                    let kind = if members.iter().all(|(_, k)| k[position] == Some(first)) {
                        first
                    } else {
                        SegmentKind::Opaque
                    };
                    dynamic_segments.push(DynamicSegment { position, inferred_kind: kind });
                    format!("{{{}}}", kind.as_str())
                })
                .collect();
            UrlPattern {
                template: format!("/{}", parts.join("/")),
                member_urls: members.into_iter().map(|(u, _)| u).collect(),
                dynamic_segments,
            }
        })
        .collect();
    patterns.sort_by(|a, b| a.template.cmp(&b.template).then_with(|| a.member_urls.cmp(&b.member_urls)));
    patterns
}
