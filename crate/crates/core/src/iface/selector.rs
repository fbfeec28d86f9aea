//! Selector grammar and matching.
//!
//! ```text
//! selector := compound (" " compound)*
//! compound := [tag] ("#" ident)? ("." ident)* ("[" ident "=" value "]")*
//! ```
//!
//! Compounds are joined by the descendant combinator only.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::dom::{DomTree, Node, NodeRef, DOCUMENT_TAG};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Compound {
    pub tag: Option<String>,
    pub id: Option<String>,
    pub classes: BTreeSet<String>,
    pub attr_equals: Vec<(String, String)>,
}

impl Compound {
    pub fn matches(&self, node: &Node) -> bool {
        if node.tag == DOCUMENT_TAG {
            return false;
        }
        if self.tag.as_ref().is_some_and(|t| *t != node.tag) {
            return false;
        }
        if self.id.as_ref().is_some_and(|id| node.id() != Some(id.as_str())) {
            return false;
        }
        if !self.classes.iter().all(|c| node.has_class(c)) {
            return false;
        }
        self.attr_equals.iter().all(|(k, v)| node.attr(k) == Some(v.as_str()))
    }

    fn is_empty(&self) -> bool {
        self.tag.is_none() && self.id.is_none() && self.classes.is_empty() && self.attr_equals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    pub compounds: Vec<Compound>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("selector syntax error at column {column}: {message}")]
pub struct SelectorError {
    /// 1-based character column.
    pub column: usize,
    pub message: String,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

impl FromStr for Selector {
    type Err = SelectorError;

    fn from_str(source: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = source.chars().collect();
        let mut pos = 0;
        let err = |pos: usize, message: &str| SelectorError { column: pos + 1, message: message.to_string() };
        let ident = |pos: &mut usize| -> String {
            let start = *pos;
            while *pos < chars.len() && is_ident_char(chars[*pos]) {
                *pos += 1;
            }
            chars[start..*pos].iter().collect()
        };

        let mut compounds = Vec::new();
        while pos < chars.len() && chars[pos] == ' ' {
            pos += 1;
        }
        while pos < chars.len() {
            let start = pos;
            let mut compound = Compound::default();
            let tag = ident(&mut pos);
            if !tag.is_empty() {
                compound.tag = Some(tag.to_ascii_lowercase());
            }
            // The id and classes may come in any order; at most one id.
            while pos < chars.len() && (chars[pos] == '#' || chars[pos] == '.') {
                let marker = chars[pos];
                pos += 1;
                let name = ident(&mut pos);
                if name.is_empty() {
                    return Err(err(pos, &format!("expected identifier after '{marker}'")));
                }
                if marker == '.' {
                    compound.classes.insert(name);
                } else if compound.id.replace(name).is_some() {
                    return Err(err(pos, "a compound may carry only one '#id'"));
                }
            }
            while pos < chars.len() && chars[pos] == '[' {
                pos += 1;
                let name = ident(&mut pos);
                if name.is_empty() {
                    return Err(err(pos, "expected attribute name after '['"));
                }
                if pos >= chars.len() || chars[pos] != '=' {
                    return Err(err(pos, "expected '=' in attribute constraint"));
                }
                pos += 1;
                let value: String = match chars.get(pos) {
                    Some(&q @ ('"' | '\'')) => {
                        pos += 1;
                        let start = pos;
                        while pos < chars.len() && chars[pos] != q {
                            pos += 1;
                        }
                        if pos >= chars.len() {
                            return Err(err(start - 1, "unterminated quoted value"));
                        }
                        let v = chars[start..pos].iter().collect();
                        pos += 1;
                        v
                    }
                    _ => {
                        let start = pos;
                        while pos < chars.len() && chars[pos] != ']' && chars[pos] != ' ' {
                            pos += 1;
                        }
                        chars[start..pos].iter().collect()
                    }
                };
                if pos >= chars.len() || chars[pos] != ']' {
                    return Err(err(pos, "expected ']'"));
                }
                pos += 1;
                compound.attr_equals.push((name.to_ascii_lowercase(), value));
            }
            if compound.is_empty() {
                return Err(err(start, "expected tag, '#id', '.class' or '[attr=value]'"));
            }
            if pos < chars.len() && chars[pos] != ' ' {
                return Err(err(pos, &format!("unexpected character '{}'", chars[pos])));
            }
            while pos < chars.len() && chars[pos] == ' ' {
                pos += 1;
            }
            compounds.push(compound);
        }
        if compounds.is_empty() {
            return Err(err(0, "empty selector"));
        }
        Ok(Selector { compounds })
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.compounds.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if let Some(tag) = &c.tag {
                f.write_str(tag)?;
            }
            if let Some(id) = &c.id {
                write!(f, "#{id}")?;
            }
            for class in &c.classes {
                write!(f, ".{class}")?;
            }
            for (k, v) in &c.attr_equals {
                write!(f, "[{k}=\"{v}\"]")?;
            }
        }
        Ok(())
    }
}

impl Serialize for Selector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// All nodes matching `sel` in document order.
pub fn match_selector(dom: &DomTree, sel: &Selector) -> Vec<NodeRef> {
    match_in_scope(dom, sel, dom.root())
}

/// Matches restricted to the subtree of `scope` (the scope node itself may
/// match; ancestors outside the scope are not considered).
pub fn match_in_scope(dom: &DomTree, sel: &Selector, scope: NodeRef) -> Vec<NodeRef> {
    let range = dom.subtree(scope);
    let offset = range.start;
    let len = range.len();
    // matched[i]: node offset+i matches compounds[0..=k] as a descendant chain.
    let mut matched: Vec<bool> = (0..len).map(|i| sel.compounds[0].matches(dom.node(offset + i))).collect();
    for compound in &sel.compounds[1..] {
        // below[i]: some proper ancestor of node i (within scope) is in `matched`.
        let mut below = vec![false; len];
        for i in 1..len {
            let parent = dom.node(offset + i).parent.expect("non-root node has a parent");
            if parent >= offset {
                let p = parent - offset;
                below[i] = below[p] || matched[p];
            }
        }
        matched = (0..len).map(|i| below[i] && compound.matches(dom.node(offset + i))).collect();
    }
    matched.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| offset + i).collect()
}
