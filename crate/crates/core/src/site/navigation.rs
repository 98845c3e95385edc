//! Cross-page relations: ranked navigation edges and the path hierarchy.

use std::collections::{BTreeMap, BTreeSet};

use url::Url;

use super::{EdgeKind, NavEdge};
use crate::crawler::normalize_url;
use crate::dom::{ElementNode, PageModel, SectionLabel};

/// One edge per navigation-bearing interactive element: anchors/areas with a
/// resolvable `href`, and each submit control of a form (to its `formaction`
/// or the form `action`; a form without submit controls contributes itself).
/// Self-loops are dropped. Per page, edges from the navigation section rank
/// first, then document order.
pub fn rank_navigation(models: &[PageModel]) -> Vec<NavEdge> {
    let mut edges = Vec::new();
    let mut sorted: Vec<&PageModel> = models.iter().collect();
    sorted.sort_by(|a, b| a.url.cmp(&b.url));
    for model in sorted {
        let mut candidates: Vec<(&ElementNode, String, EdgeKind)> = Vec::new();
        for node in &model.elements {
            match node.tag.as_str() {
                "a" | "area" => {
                    if let Some(target) = node.attr("href").and_then(|h| normalize_url(h, &model.url).ok()) {
                        candidates.push((node, target, EdgeKind::Link));
                    }
                }
                "form" => {
                    let action = node
                        .attr("action")
                        .filter(|a| !a.trim().is_empty())
                        .and_then(|a| normalize_url(a, &model.url).ok());
                    let submits: Vec<&ElementNode> = model
                        .descendants(&node.element_id)
                        .into_iter()
                        .filter(|d| d.is_submit_control())
                        .collect();
                    if submits.is_empty() {
                        if let Some(target) = action {
                            candidates.push((node, target, EdgeKind::Submit));
                        }
                        continue;
                    }
                    for control in submits {
                        let target = control
                            .attr("formaction")
                            .and_then(|a| normalize_url(a, &model.url).ok())
                            .or_else(|| action.clone());
                        if let Some(target) = target {
                            candidates.push((control, target, EdgeKind::Submit));
                        }
                    }
                }
                _ => {}
            }
        }
        candidates.retain(|(node, target, _)| node.interactive && *target != model.url);
        candidates.sort_by_key(|(node, ..)| (node.section != SectionLabel::Navigation, node.element_id.index()));
        for (rank, (node, to_url, kind)) in candidates.into_iter().enumerate() {
            edges.push(NavEdge {
                from_url: model.url.clone(),
                to_url,
                via_element: node.element_id.clone(),
                priority: rank + 1,
                kind,
            });
        }
    }
    edges
}

/// Parent of each page: the captured page whose path is the longest proper
/// segment-prefix of its own (same origin). The root page has no parent.
pub fn derive_hierarchy(urls: &[String]) -> BTreeMap<String, String> {
    let mut by_key: BTreeMap<(String, Vec<String>), String> = BTreeMap::new();
    let parsed: Vec<(String, String, Vec<String>)> = urls
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter_map(|u| {
            let url = Url::parse(u).ok()?;
            let segments = url
                .path()
                .split('/')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            Some((u.clone(), url.origin().ascii_serialization(), segments))
        })
        .collect();
    for (url, origin, segments) in &parsed {
        // first URL (lexicographically) wins when several share a path
        by_key
            .entry((origin.clone(), segments.clone()))
            .or_insert_with(|| url.clone());
    }
    let mut hierarchy = BTreeMap::new();
    for (url, origin, segments) in &parsed {
        for len in (0..segments.len()).rev() {
            if let Some(parent) = by_key.get(&(origin.clone(), segments[..len].to_vec())) {
                if parent != url {
                    hierarchy.insert(url.clone(), parent.clone());
                }
                break;
            }
        }
    }
    hierarchy
}
