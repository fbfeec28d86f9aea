//! Tolerant markup parser producing an arena-backed element tree.
//!
//! Elements are stored in pre-order, so a node's index is its document-order
//! index and every subtree occupies a contiguous index range. Index 0 is a
//! synthetic `#document` node that owns all top-level content.

use std::ops::Range;

pub type NodeRef = usize;

pub const DOCUMENT_TAG: &str = "#document";

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track",
    "wbr",
];
const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Content {
    Element(NodeRef),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub parent: Option<NodeRef>,
    pub content: Vec<Content>,
    /// One past the last node index of this subtree.
    subtree_end: NodeRef,
}

impl Node {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn id(&self) -> Option<&str> {
        self.attr("id")
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.attr("class").is_some_and(|c| c.split_whitespace().any(|c| c == class))
    }

    pub fn children(&self) -> impl Iterator<Item = NodeRef> + '_ {
        self.content.iter().filter_map(|c| match c {
            Content::Element(i) => Some(*i),
            Content::Text(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<Node>,
    recoveries: usize,
}

impl DomTree {
    pub fn root(&self) -> NodeRef {
        0
    }

    /// First top-level element, if any.
    pub fn document_element(&self) -> Option<NodeRef> {
        self.nodes[0].children().next()
    }

    pub fn node(&self, idx: NodeRef) -> &Node {
        &self.nodes[idx]
    }

    pub fn get(&self, idx: NodeRef) -> Option<&Node> {
        self.nodes.get(idx)
    }

    /// Number of nodes including the synthetic document node.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_count() == 0
    }

    /// Number of real elements (excludes `#document`).
    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of tolerated malformations (auto-closed or stray tags).
    pub fn recoveries(&self) -> usize {
        self.recoveries
    }

    /// Node indices of the subtree rooted at `idx`, including `idx`.
    pub fn subtree(&self, idx: NodeRef) -> Range<NodeRef> {
        idx..self.nodes[idx].subtree_end
    }

    pub fn is_ancestor(&self, ancestor: NodeRef, node: NodeRef) -> bool {
        ancestor != node && self.subtree(ancestor).contains(&node)
    }

    pub fn ancestors(&self, idx: NodeRef) -> impl Iterator<Item = NodeRef> + '_ {
        std::iter::successors(self.nodes[idx].parent, move |&p| self.nodes[p].parent)
    }

    /// Descendant text with whitespace collapsed and trimmed.
    pub fn text_content(&self, idx: NodeRef) -> String {
        let mut raw = String::new();
        self.collect_text(idx, &mut raw);
        crate::text::normalize_whitespace(&raw)
    }

    fn collect_text(&self, idx: NodeRef, out: &mut String) {
        for c in &self.nodes[idx].content {
            match c {
                Content::Text(t) => {
                    out.push_str(t);
                    out.push(' ');
                }
                Content::Element(child) => self.collect_text(*child, out),
            }
        }
    }
}

/// Parse markup. Never fails: malformed input is repaired and counted in
/// [`DomTree::recoveries`].
pub fn parse_markup(source: &str) -> DomTree {
    Parser::new(source).run()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    nodes: Vec<Node>,
    stack: Vec<NodeRef>,
    recoveries: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        let doc = Node {
            tag: DOCUMENT_TAG.to_string(),
            attrs: Vec::new(),
            parent: None,
            content: Vec::new(),
            subtree_end: 1,
        };
        Parser { src, pos: 0, nodes: vec![doc], stack: vec![0], recoveries: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn run(mut self) -> DomTree {
        while self.pos < self.src.len() {
            let rest = self.rest();
            if let Some(comment) = rest.strip_prefix("<!--") {
                self.pos = match comment.find("-->") {
                    Some(end) => self.pos + 4 + end + 3,
                    None => self.src.len(),
                };
            } else if rest.starts_with("<!") || rest.starts_with("<?") {
                self.skip_past('>');
            } else if rest.starts_with("</") {
                self.close_tag();
            } else if rest.starts_with('<')
                && rest[1..].chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            {
                self.open_tag();
            } else {
                self.text();
            }
        }
        // Elements still open at end of input are closed implicitly.
        while self.stack.len() > 1 {
            self.pop();
            self.recoveries += 1;
        }
        let end = self.nodes.len();
        self.nodes[0].subtree_end = end;
        DomTree { nodes: self.nodes, recoveries: self.recoveries }
    }

    fn skip_past(&mut self, c: char) {
        self.pos = match self.rest().find(c) {
            Some(i) => self.pos + i + c.len_utf8(),
            None => self.src.len(),
        };
    }

    fn text(&mut self) {
        let rest = self.rest();
        // A lone '<' that does not start markup is literal text.
        let start_skip = usize::from(rest.starts_with('<'));
        let len = rest[start_skip..].find('<').map_or(rest.len(), |i| i + start_skip);
        let raw = &rest[..len];
        self.pos += len;
        if raw.trim().is_empty() {
            return;
        }
        let parent = *self.stack.last().expect("document node is never popped");
        let decoded = decode_entities(raw);
        match self.nodes[parent].content.last_mut() {
            Some(Content::Text(prev)) => prev.push_str(&decoded),
            _ => self.nodes[parent].content.push(Content::Text(decoded)),
        }
    }

    fn read_name(&mut self) -> String {
        let rest = self.rest();
        let len = rest
            .find(|c: char| c.is_whitespace() || c == '>' || c == '/' || c == '=')
            .unwrap_or(rest.len());
        self.pos += len;
        rest[..len].to_ascii_lowercase()
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    fn close_tag(&mut self) {
        self.pos += 2;
        let name = self.read_name();
        self.skip_past('>');
        match self.stack.iter().rposition(|&n| n != 0 && self.nodes[n].tag == name) {
            Some(depth) => {
                // Anything opened after the matching element is closed at its boundary.
                while self.stack.len() > depth + 1 {
                    self.pop();
                    self.recoveries += 1;
                }
                self.pop();
            }
            None => self.recoveries += 1,
        }
    }

    fn open_tag(&mut self) {
        self.pos += 1;
        let tag = self.read_name();
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut self_closing = false;
        loop {
            self.skip_ws();
            let rest = self.rest();
            if rest.is_empty() {
                break;
            }
            if rest.starts_with("/>") {
                self.pos += 2;
                self_closing = true;
                break;
            }
            if rest.starts_with('>') {
                self.pos += 1;
                break;
            }
            if rest.starts_with('/') {
                self.pos += 1;
                continue;
            }
            let name = self.read_name();
            if name.is_empty() {
                // Unparseable attribute character; skip it.
                let c = self.rest().chars().next().map_or(1, char::len_utf8);
                self.pos += c;
                self.recoveries += 1;
                continue;
            }
            self.skip_ws();
            let value = if self.rest().starts_with('=') {
                self.pos += 1;
                self.skip_ws();
                self.attr_value()
            } else {
                String::new()
            };
            if !attrs.iter().any(|(k, _)| *k == name) {
                attrs.push((name, value));
            }
        }

        let parent = *self.stack.last().expect("document node is never popped");
        let idx = self.nodes.len();
        self.nodes.push(Node { tag: tag.clone(), attrs, parent: Some(parent), content: Vec::new(), subtree_end: idx + 1 });
        self.nodes[parent].content.push(Content::Element(idx));

        if self_closing || VOID_ELEMENTS.contains(&tag.as_str()) {
            return;
        }
        if RAW_TEXT_ELEMENTS.contains(&tag.as_str()) {
            let close = format!("</{tag}");
            let rest = self.rest();
            match rest.to_ascii_lowercase().find(&close) {
                Some(i) => {
                    self.pos += i;
                    self.pos += close.len();
                    self.skip_past('>');
                }
                None => {
                    self.pos = self.src.len();
                    self.recoveries += 1;
                }
            }
            return;
        }
        self.stack.push(idx);
    }

    fn attr_value(&mut self) -> String {
        let rest = self.rest();
        let quote = rest.chars().next();
        match quote {
            Some(q @ ('"' | '\'')) => {
                let body = &rest[1..];
                match body.find(q) {
                    Some(end) => {
                        self.pos += end + 2;
                        decode_entities(&body[..end])
                    }
                    None => {
                        self.recoveries += 1;
                        self.pos = self.src.len();
                        decode_entities(body)
                    }
                }
            }
            _ => {
                let len = rest.find(|c: char| c.is_whitespace() || c == '>').unwrap_or(rest.len());
                self.pos += len;
                decode_entities(&rest[..len])
            }
        }
    }

    fn pop(&mut self) {
        let idx = self.stack.pop().expect("stack underflow");
        self.nodes[idx].subtree_end = self.nodes.len();
    }
}

/// Decode the named entities the renderer emits plus numeric references.
pub fn decode_entities(raw: &str) -> String {
    if !raw.contains('&') {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let entity = &rest[1..semi];
            let ch = match entity {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ => entity.strip_prefix('#').and_then(|num| {
                    let code = match num.strip_prefix(['x', 'X']) {
                        Some(hex) => u32::from_str_radix(hex, 16).ok(),
                        None => num.parse().ok(),
                    };
                    code.and_then(char::from_u32)
                }),
            };
            ch.map(|c| (c, semi + 1))
        });
        match decoded {
            Some((c, consumed)) => {
                out.push(c);
                rest = &rest[consumed..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Escape text for inclusion in element content or a double-quoted attribute.
pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}
