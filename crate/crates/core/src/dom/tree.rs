//! Error-recovering tree construction over the html5gum tokenizer.
//!
//! Only elements present in the markup become nodes: unlike a browser we do
//! not synthesize `head`/`tbody`. Recovery follows the common implied-end-tag
//! rules (paragraphs, list items, table cells, options) and ignores stray end
//! tags.

use std::collections::BTreeMap;

use html5gum::{DefaultEmitter, Token, Tokenizer};

#[derive(Debug, Clone)]
pub(crate) enum Content {
    Text(String),
    Element(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct RawNode {
    pub tag: String,
    pub attributes: BTreeMap<String, String>,
    pub parent: Option<usize>,
    pub content: Vec<Content>,
    /// Byte offset of the start tag in the source document.
    pub offset: usize,
    /// Inserted to hold several top-level elements; has no source tag.
    #[cfg_attr(not(test), allow(dead_code))]
    pub synthetic: bool,
}

impl RawNode {
    pub fn children(&self) -> impl Iterator<Item = usize> + '_ {
        self.content.iter().filter_map(|c| match c {
            Content::Element(i) => Some(*i),
            Content::Text(_) => None,
        })
    }
}

/// Nodes in document order; index 0 is the root.
#[derive(Debug, Clone)]
pub(crate) struct RawTree {
    pub nodes: Vec<RawNode>,
}

pub(crate) const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset", "figcaption",
    "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "menu",
    "nav", "ol", "p", "pre", "section", "table", "ul",
];

fn lossy(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Parses `html` into a single-rooted tree; `None` when the input holds no
/// element at all.
pub(crate) fn parse(html: &str) -> Option<RawTree> {
    let mut emitter = DefaultEmitter::<usize>::new_with_span();
    emitter.naively_switch_states(true);

    let mut nodes: Vec<RawNode> = Vec::new();
    let mut top_level: Vec<Content> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for token in Tokenizer::new_with_emitter(html, emitter).flatten() {
        match token {
            Token::StartTag(tag) => {
                let name = lossy(&tag.name).to_ascii_lowercase();
                if name == "html" && stack.first().is_some_and(|&i| nodes[i].tag == "html") {
                    continue;
                }
                if (name == "body" || name == "head")
                    && stack.iter().any(|&i| nodes[i].tag == name)
                {
                    continue;
                }
                close_implied(&name, &nodes, &mut stack);
                let attributes = tag
                    .attributes
                    .iter()
                    .map(|(k, v)| (lossy(k).to_ascii_lowercase(), lossy(&v.value)))
                    .collect();
                let index = nodes.len();
                let parent = stack.last().copied();
                nodes.push(RawNode {
                    tag: name.clone(),
                    attributes,
                    parent,
                    content: Vec::new(),
                    offset: tag.span.start,
                    synthetic: false,
                });
                match parent {
                    Some(p) => nodes[p].content.push(Content::Element(index)),
                    None => top_level.push(Content::Element(index)),
                }
                if !(VOID_TAGS.contains(&name.as_str()) || tag.self_closing) {
                    stack.push(index);
                }
            }
            Token::EndTag(tag) => {
                let name = lossy(&tag.name).to_ascii_lowercase();
                // later content stays inside the document element, as in browsers
                if name == "html" || name == "body" {
                    continue;
                }
                if let Some(pos) = stack.iter().rposition(|&i| nodes[i].tag == name) {
                    stack.truncate(pos);
                }
            }
            Token::String(text) => {
                let text = lossy(&text.value);
                match stack.last() {
                    Some(&p) => nodes[p].content.push(Content::Text(text)),
                    None => top_level.push(Content::Text(text)),
                }
            }
            Token::Comment(_) | Token::Doctype(_) | Token::Error(_) => {}
        }
    }

    let roots: Vec<usize> = top_level
        .iter()
        .filter_map(|c| match c {
            Content::Element(i) => Some(*i),
            Content::Text(_) => None,
        })
        .collect();
    match roots.len() {
        0 => None,
        1 if roots[0] == 0 => Some(RawTree { nodes }),
        _ => Some(wrap_in_synthetic_root(nodes, top_level)),
    }
}

fn close_implied(name: &str, nodes: &[RawNode], stack: &mut Vec<usize>) {
    let pop_to = |stack: &mut Vec<usize>, targets: &[&str], boundaries: &[&str]| {
        for pos in (0..stack.len()).rev() {
            let tag = nodes[stack[pos]].tag.as_str();
            if targets.contains(&tag) {
                stack.truncate(pos);
                return;
            }
            if boundaries.contains(&tag) {
                return;
            }
        }
    };
    if CLOSES_P.contains(&name) {
        pop_to(stack, &["p"], &["button", "table", "td", "th"]);
    }
    match name {
        "li" => pop_to(stack, &["li"], &["ul", "ol", "menu"]),
        "dt" | "dd" => pop_to(stack, &["dt", "dd"], &["dl"]),
        "option" => pop_to(stack, &["option"], &["select", "datalist"]),
        "optgroup" => pop_to(stack, &["optgroup", "option"], &["select"]),
        "tr" => pop_to(stack, &["tr"], &["table", "thead", "tbody", "tfoot"]),
        "td" | "th" => pop_to(stack, &["td", "th"], &["tr", "table"]),
        "thead" | "tbody" | "tfoot" => {
            pop_to(stack, &["thead", "tbody", "tfoot"], &["table"])
        }
        _ => {}
    }
}

fn wrap_in_synthetic_root(nodes: Vec<RawNode>, top_level: Vec<Content>) -> RawTree {
    let mut shifted: Vec<RawNode> = Vec::with_capacity(nodes.len() + 1);
    shifted.push(RawNode {
        tag: "html".into(),
        attributes: BTreeMap::new(),
        parent: None,
        content: shift(top_level),
        offset: 0,
        synthetic: true,
    });
    for mut node in nodes {
        node.parent = Some(node.parent.map_or(0, |p| p + 1));
        node.content = shift(node.content);
        shifted.push(node);
    }
    RawTree { nodes: shifted }
}

fn shift(content: Vec<Content>) -> Vec<Content> {
    content
        .into_iter()
        .map(|c| match c {
            Content::Element(i) => Content::Element(i + 1),
            text => text,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(tree: &RawTree) -> Vec<&str> {
        tree.nodes.iter().map(|n| n.tag.as_str()).collect()
    }

    #[test]
    fn keeps_only_markup_elements() {
        let tree = parse("<html><body></body></html>").unwrap();
        assert_eq!(tags(&tree), ["html", "body"]);
        assert_eq!(tree.nodes[1].parent, Some(0));
    }

    #[test]
    fn recovers_implied_end_tags() {
        let tree = parse("<ul><li>a<li>b</ul><p>x<div>y</div>").unwrap();
        assert_eq!(tags(&tree), ["html", "ul", "li", "li", "p", "div"]);
        assert!(tree.nodes[0].synthetic);
        // both list items are children of the list
        assert_eq!(tree.nodes[2].parent, Some(1));
        assert_eq!(tree.nodes[3].parent, Some(1));
        // <div> closes the open paragraph
        assert_eq!(tree.nodes[5].parent, Some(0));
    }

    #[test]
    fn void_and_raw_text_elements() {
        let tree =
            parse("<div><input name=a><script>if (a < b) { x('<p>') }</script><br></div>").unwrap();
        assert_eq!(tags(&tree), ["div", "input", "script", "br"]);
        assert_eq!(tree.nodes[3].parent, Some(0));
    }

    #[test]
    fn stray_end_tags_are_ignored() {
        let tree = parse("<div></span><p>a</p></div>").unwrap();
        assert_eq!(tags(&tree), ["div", "p"]);
    }

    #[test]
    fn no_elements_means_no_tree() {
        assert!(parse("just text").is_none());
        assert!(parse("<!-- c -->").is_none());
    }

    #[test]
    fn offsets_follow_document_order() {
        let html = "<html><body><a>1</a><b>2</b></body></html>";
        let tree = parse(html).unwrap();
        let offsets: Vec<_> = tree.nodes.iter().map(|n| n.offset).collect();
        assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(&html[tree.nodes[2].offset..tree.nodes[2].offset + 3], "<a>");
    }
}
