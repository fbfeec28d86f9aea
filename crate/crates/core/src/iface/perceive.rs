use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dom::{DomTree, NodeRef};
use super::names;
use super::recipe::{FieldSpec, Recipe};
use super::selector::{match_in_scope, match_selector};
use crate::text::{fnv1a64, hex64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageKind {
    Start,
    Serp,
    Doc,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PerceivedElement {
    pub present: bool,
    pub text: String,
    pub value: String,
}

/// One list item; `None` marks a field whose selector did not match.
pub type ListRecord = BTreeMap<String, Option<String>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceivedState {
    pub page_kind: PageKind,
    pub elements: BTreeMap<String, PerceivedElement>,
    /// Records in document order; an item's rank is its 1-based position.
    pub lists: BTreeMap<String, Vec<ListRecord>>,
}

impl PerceivedState {
    pub fn element(&self, name: &str) -> Option<&PerceivedElement> {
        self.elements.get(name).filter(|e| e.present)
    }

    pub fn list(&self, name: &str) -> &[ListRecord] {
        self.lists.get(name).map_or(&[], Vec::as_slice)
    }

    /// Field of the item at 1-based `rank`.
    pub fn field(&self, list: &str, rank: usize, field: &str) -> Option<&str> {
        self.list(list).get(rank.checked_sub(1)?)?.get(field)?.as_deref()
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("perceived state serializes")
    }

    /// FNV-1a over the canonical serialization, as 16 lowercase hex digits.
    pub fn digest(&self) -> String {
        hex64(fnv1a64(self.canonical_json().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMode {
    #[default]
    Lenient,
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perception {
    pub state: PerceivedState,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PerceiveError {
    #[error("element \"{name}\" is ambiguous: {count} nodes match")]
    Ambiguous { name: String, count: usize },
}

fn field_value(dom: &DomTree, node: NodeRef, spec: &FieldSpec) -> Option<String> {
    match &spec.attribute {
        Some(attr) => dom.node(node).attr(attr).map(str::to_string),
        None => Some(dom.text_content(node)),
    }
}

pub fn perceive(dom: &DomTree, recipe: &Recipe, mode: PerceptionMode) -> Result<Perception, PerceiveError> {
    let mut warnings = Vec::new();
    let mut elements = BTreeMap::new();
    for (name, spec) in &recipe.elements {
        let hits = match_selector(dom, &spec.selector);
        if hits.len() > 1 {
            match mode {
                PerceptionMode::Strict => {
                    return Err(PerceiveError::Ambiguous { name: name.clone(), count: hits.len() })
                }
                PerceptionMode::Lenient => {
                    warnings.push(format!("element \"{name}\" matched {} nodes; using the first", hits.len()))
                }
            }
        }
        let el = match hits.first() {
            Some(&n) => PerceivedElement {
                present: true,
                text: dom.text_content(n),
                value: dom.node(n).attr("value").unwrap_or_default().to_string(),
            },
            None => PerceivedElement::default(),
        };
        elements.insert(name.clone(), el);
    }

    let mut lists = BTreeMap::new();
    for (name, spec) in &recipe.lists {
        let records = match_selector(dom, &spec.selector)
            .into_iter()
            .map(|item| {
                spec.fields
                    .iter()
                    .map(|(field, fspec)| {
                        let value = match_in_scope(dom, &fspec.selector, item)
                            .first()
                            .and_then(|&n| field_value(dom, n, fspec));
                        (field.clone(), value)
                    })
                    .collect::<ListRecord>()
            })
            .collect();
        lists.insert(name.clone(), records);
    }

    let present = |n: &str| elements.get(n).is_some_and(|e: &PerceivedElement| e.present);
    let page_kind = if present(names::DOC_BODY) {
        PageKind::Doc
    } else if present(names::RESULT_STATS) {
        PageKind::Serp
    } else if present(names::QUERY_BOX) {
        PageKind::Start
    } else {
        PageKind::Unknown
    };

    Ok(Perception { state: PerceivedState { page_kind, elements, lists }, warnings })
}
