//! Locator generation and a small CSS selector engine.
//!
//! Generated locators use `#id` when the id is unique and a valid identifier,
//! otherwise the shortest chain of `tag:nth-child(k)` steps joined by `>` that
//! matches one element, anchored at a uniquely-identified ancestor or `:root`
//! when needed. The engine understands that grammar plus type, class and
//! attribute selectors and the descendant combinator, enough to evaluate
//! locators produced elsewhere.

use std::collections::HashMap;
use std::fmt;

use regex::Regex;
use std::sync::OnceLock;

/// Minimal view of a tree the engine can match against.
pub trait SelectorTree {
    fn len(&self) -> usize;
    fn tag(&self, node: usize) -> &str;
    fn attr(&self, node: usize, name: &str) -> Option<&str>;
    fn parent(&self, node: usize) -> Option<usize>;
    /// 1-based position among element siblings (the root counts as 1).
    fn sibling_index(&self, node: usize) -> usize;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorParseError(pub String);

impl fmt::Display for SelectorParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unsupported selector: {}", self.0)
    }
}

impl std::error::Error for SelectorParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum AttrTest {
    Exists(String),
    Equals(String, String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Compound {
    tag: Option<String>,
    id: Option<String>,
    classes: Vec<String>,
    attrs: Vec<AttrTest>,
    nth_child: Option<usize>,
    root: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Combinator {
    Child,
    Descendant,
}

/// Parsed selector: compounds from left to right, with the combinator that
/// links each compound to the previous one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    parts: Vec<(Combinator, Compound)>,
}

impl Selector {
    pub fn parse(text: &str) -> Result<Self, SelectorParseError> {
        let err = || SelectorParseError(text.to_string());
        let mut parts = Vec::new();
        let mut combinator = Combinator::Descendant;
        let chars: Vec<char> = text.trim().chars().collect();
        let mut i = 0;
        while i < chars.len() {
            match chars[i] {
                ' ' => {
                    i += 1;
                }
                '>' => {
                    if parts.is_empty() {
                        return Err(err());
                    }
                    combinator = Combinator::Child;
                    i += 1;
                }
                _ => {
                    let (compound, next) = parse_compound(&chars, i).ok_or_else(err)?;
                    parts.push((combinator, compound));
                    combinator = Combinator::Descendant;
                    i = next;
                }
            }
        }
        if parts.is_empty() || combinator == Combinator::Child {
            return Err(err());
        }
        Ok(Self { parts })
    }

    /// Every node the selector matches, in document order.
    pub fn select<T: SelectorTree + ?Sized>(&self, tree: &T) -> Vec<usize> {
        (0..tree.len()).filter(|&n| self.matches(tree, n)).collect()
    }

    pub fn matches<T: SelectorTree + ?Sized>(&self, tree: &T, node: usize) -> bool {
        self.matches_from(tree, node, self.parts.len() - 1)
    }

    fn matches_from<T: SelectorTree + ?Sized>(&self, tree: &T, node: usize, part: usize) -> bool {
        let (combinator, compound) = &self.parts[part];
        if !compound_matches(tree, node, compound) {
            return false;
        }
        if part == 0 {
            return true;
        }
        match combinator {
            Combinator::Child => tree
                .parent(node)
                .is_some_and(|p| self.matches_from(tree, p, part - 1)),
            Combinator::Descendant => {
                let mut cursor = tree.parent(node);
                while let Some(p) = cursor {
                    if self.matches_from(tree, p, part - 1) {
                        return true;
                    }
                    cursor = tree.parent(p);
                }
                false
            }
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

fn read_name(chars: &[char], mut i: usize) -> (String, usize) {
    let start = i;
    while i < chars.len() && is_name_char(chars[i]) {
        i += 1;
    }
    (chars[start..i].iter().collect(), i)
}

fn parse_compound(chars: &[char], mut i: usize) -> Option<(Compound, usize)> {
    let mut compound = Compound::default();
    let start = i;
    if chars[i] == '*' {
        i += 1;
    } else if is_name_char(chars[i]) {
        let (name, next) = read_name(chars, i);
        compound.tag = Some(name.to_ascii_lowercase());
        i = next;
    }
    while i < chars.len() && !matches!(chars[i], ' ' | '>') {
        match chars[i] {
            '#' => {
                let (name, next) = read_name(chars, i + 1);
                if name.is_empty() {
                    return None;
                }
                compound.id = Some(name);
                i = next;
            }
            '.' => {
                let (name, next) = read_name(chars, i + 1);
                if name.is_empty() {
                    return None;
                }
                compound.classes.push(name);
                i = next;
            }
            '[' => {
                let close = chars[i..].iter().position(|&c| c == ']')? + i;
                let inner: String = chars[i + 1..close].iter().collect();
                compound.attrs.push(match inner.split_once('=') {
                    Some((name, value)) => {
                        let value = value.trim();
                        let value = value
                            .strip_prefix('"')
                            .and_then(|v| v.strip_suffix('"'))
                            .or_else(|| value.strip_prefix('\'').and_then(|v| v.strip_suffix('\'')))
                            .unwrap_or(value);
                        AttrTest::Equals(name.trim().to_ascii_lowercase(), value.to_string())
                    }
                    None => AttrTest::Exists(inner.trim().to_ascii_lowercase()),
                });
                i = close + 1;
            }
            ':' => {
                let (name, next) = read_name(chars, i + 1);
                match name.as_str() {
                    "root" => {
                        compound.root = true;
                        i = next;
                    }
                    "nth-child" => {
                        if chars.get(next) != Some(&'(') {
                            return None;
                        }
                        let close = chars[next..].iter().position(|&c| c == ')')? + next;
                        let arg: String = chars[next + 1..close].iter().collect();
                        compound.nth_child = Some(arg.trim().parse().ok()?);
                        i = close + 1;
                    }
                    _ => return None,
                }
            }
            _ => return None,
        }
    }
    (i > start).then_some((compound, i))
}

fn compound_matches<T: SelectorTree + ?Sized>(tree: &T, node: usize, c: &Compound) -> bool {
    if let Some(tag) = &c.tag {
        if tree.tag(node) != tag {
            return false;
        }
    }
    if let Some(id) = &c.id {
        if tree.attr(node, "id") != Some(id.as_str()) {
            return false;
        }
    }
    if !c.classes.is_empty() {
        let classes = tree.attr(node, "class").unwrap_or("");
        if !c
            .classes
            .iter()
            .all(|want| classes.split_ascii_whitespace().any(|have| have == want))
        {
            return false;
        }
    }
    for test in &c.attrs {
        let ok = match test {
            AttrTest::Exists(name) => tree.attr(node, name).is_some(),
            AttrTest::Equals(name, value) => tree.attr(node, name) == Some(value.as_str()),
        };
        if !ok {
            return false;
        }
    }
    if c.root && tree.parent(node).is_some() {
        return false;
    }
    if let Some(k) = c.nth_child {
        if tree.sibling_index(node) != k {
            return false;
        }
    }
    true
}

fn ident_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"^-?[A-Za-z_][A-Za-z0-9_-]*$").unwrap())
}

/// Generates one locator per node (indexed like the tree).
///
/// Runs in O(n · depth): nodes are grouped by their chain of structural steps
/// (`tag:nth-child(k)`), one more ancestor at a time, and each node keeps the
/// shortest chain whose group is a singleton or whose top is anchored.
pub fn generate_locators<T: SelectorTree + ?Sized>(tree: &T) -> Vec<String> {
    let n = tree.len();
    let mut id_counts: HashMap<&str, usize> = HashMap::new();
    for node in 0..n {
        if let Some(id) = tree.attr(node, "id") {
            *id_counts.entry(id).or_default() += 1;
        }
    }
    let id_steps: Vec<Option<String>> = (0..n)
        .map(|node| match tree.attr(node, "id") {
            Some(id) if id_counts[id] == 1 && ident_pattern().is_match(id) => Some(format!("#{id}")),
            _ => None,
        })
        .collect();
    let structural: Vec<String> = (0..n)
        .map(|node| format!("{}:nth-child({})", tree.tag(node), tree.sibling_index(node)))
        .collect();

    let mut locators: Vec<Option<String>> = vec![None; n];
    let mut cursor: Vec<Option<usize>> = (0..n).map(Some).collect();
    let mut group: Vec<usize> = vec![0; n];
    let mut chains: Vec<Vec<usize>> = vec![Vec::new(); n];
    loop {
        let mut interner: HashMap<(usize, &str), usize> = HashMap::new();
        let mut extended = Vec::new();
        for node in 0..n {
            if locators[node].is_some() {
                continue;
            }
            let Some(at) = cursor[node] else {
                continue;
            };
            let next_id = interner.len();
            group[node] = *interner
                .entry((group[node], structural[at].as_str()))
                .or_insert(next_id);
            chains[node].push(at);
            cursor[node] = tree.parent(at);
            extended.push(node);
        }
        if extended.is_empty() {
            break;
        }
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for &node in &extended {
            *sizes.entry(group[node]).or_default() += 1;
        }
        for &node in &extended {
            let top = *chains[node].last().unwrap();
            let anchored = id_steps[top].is_some() || tree.parent(top).is_none();
            if sizes[&group[node]] == 1 || anchored {
                locators[node] = Some(render_chain(&chains[node], &id_steps, &structural, tree));
            }
        }
    }
    locators.into_iter().map(|l| l.unwrap_or_default()).collect()
}

fn render_chain<T: SelectorTree + ?Sized>(
    chain: &[usize],
    id_steps: &[Option<String>],
    structural: &[String],
    tree: &T,
) -> String {
    let last = chain.len() - 1;
    chain
        .iter()
        .enumerate()
        .rev()
        .map(|(i, &node)| {
            if i == last {
                if let Some(id) = &id_steps[node] {
                    return id.as_str();
                }
                if tree.parent(node).is_none() {
                    return ":root";
                }
            }
            structural[node].as_str()
        })
        .collect::<Vec<_>>()
        .join(" > ")
}
