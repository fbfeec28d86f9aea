//! The command direction of the blueprint: semantic actions to node commands.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dom::{DomTree, NodeRef};
use super::recipe::{EntryAction, Recipe, Role};
use super::selector::{match_in_scope, match_selector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Click,
    Fill,
    Back,
    Save,
    Stop,
}

/// What a semantic action points at: a named element, or a field of a list item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Element(String),
    Item { list: String, rank: usize, field: String },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Element(name) => f.write_str(name),
            Target::Item { list, rank, field } => write!(f, "{list}[{rank}].{field}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticAction {
    pub verb: Verb,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

impl SemanticAction {
    pub fn click(target: Target) -> Self {
        SemanticAction { verb: Verb::Click, target: Some(target), payload: None }
    }

    pub fn click_element(name: &str) -> Self {
        Self::click(Target::Element(name.to_string()))
    }

    pub fn fill(name: &str, text: impl Into<String>) -> Self {
        SemanticAction { verb: Verb::Fill, target: Some(Target::Element(name.to_string())), payload: Some(text.into()) }
    }

    pub fn bare(verb: Verb) -> Self {
        SemanticAction { verb, target: None, payload: None }
    }

    /// Shape invariants independent of any recipe.
    pub fn check_shape(&self) -> Result<(), GroundError> {
        match self.verb {
            Verb::Fill if self.payload.is_none() => Err(GroundError::Invalid("fill requires a payload".into())),
            Verb::Click if self.payload.is_some() => Err(GroundError::Invalid("click forbids a payload".into())),
            Verb::Click | Verb::Fill if self.target.is_none() => {
                Err(GroundError::Invalid(format!("{:?} requires a target", self.verb).to_lowercase()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SemanticAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = format!("{:?}", self.verb).to_lowercase();
        match (&self.target, &self.payload) {
            (Some(t), Some(p)) => write!(f, "{verb} {t} \"{p}\""),
            (Some(t), None) => write!(f, "{verb} {t}"),
            _ => f.write_str(&verb),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    ClickNode,
    FillNode,
    Back,
    Save,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowserCommand {
    pub kind: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_ref: Option<NodeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl BrowserCommand {
    pub fn bare(kind: CommandKind) -> Self {
        BrowserCommand { kind, node_ref: None, text: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("unknown target \"{0}\": not defined in the recipe")]
    UnknownTarget(String),
    #[error("target \"{0}\" is defined in the recipe but not present on the page")]
    Unmatched(String),
    #[error("target \"{target}\" does not accept {verb:?}")]
    NotActionable { target: String, verb: Verb },
    #[error("invalid action: {0}")]
    Invalid(String),
}

impl GroundError {
    /// Stable short code, distinct per variant.
    pub fn code(&self) -> &'static str {
        match self {
            GroundError::UnknownTarget(_) => "unknown_target",
            GroundError::Unmatched(_) => "grounding_failed",
            GroundError::NotActionable { .. } => "not_actionable",
            GroundError::Invalid(_) => "invalid_action",
        }
    }
}

fn accepts(action: Option<EntryAction>, role: Option<Role>, verb: Verb) -> bool {
    match (action, verb) {
        (Some(EntryAction::Click), Verb::Click) | (Some(EntryAction::Fill), Verb::Fill) => true,
        (Some(_), _) => false,
        (None, Verb::Click) => matches!(role, Some(Role::Button | Role::Link)),
        (None, Verb::Fill) => role == Some(Role::Input),
        (None, _) => false,
    }
}

/// Check an action against the recipe alone (no page needed).
pub fn validate_action(action: &SemanticAction, recipe: &Recipe) -> Result<(), GroundError> {
    action.check_shape()?;
    let Some(target) = &action.target else { return Ok(()) };
    let (entry_action, role) = match target {
        Target::Element(name) => {
            let el = recipe.elements.get(name).ok_or_else(|| GroundError::UnknownTarget(target.to_string()))?;
            (el.action, Some(el.role))
        }
        Target::Item { list, rank, field } => {
            let spec = recipe.lists.get(list).ok_or_else(|| GroundError::UnknownTarget(target.to_string()))?;
            let f = spec.fields.get(field).ok_or_else(|| GroundError::UnknownTarget(target.to_string()))?;
            if *rank == 0 {
                return Err(GroundError::Invalid("list ranks are 1-based".into()));
            }
            (f.action, None)
        }
    };
    if !accepts(entry_action, role, action.verb) {
        return Err(GroundError::NotActionable { target: target.to_string(), verb: action.verb });
    }
    Ok(())
}

/// Resolve the node a target refers to on the given page.
pub fn resolve_target(target: &Target, dom: &DomTree, recipe: &Recipe) -> Result<NodeRef, GroundError> {
    match target {
        Target::Element(name) => {
            let el = recipe.elements.get(name).ok_or_else(|| GroundError::UnknownTarget(name.clone()))?;
            match_selector(dom, &el.selector).first().copied().ok_or_else(|| GroundError::Unmatched(name.clone()))
        }
        Target::Item { list, rank, field } => {
            let spec = recipe.lists.get(list).ok_or_else(|| GroundError::UnknownTarget(target.to_string()))?;
            let fspec = spec.fields.get(field).ok_or_else(|| GroundError::UnknownTarget(target.to_string()))?;
            let item = rank
                .checked_sub(1)
                .and_then(|i| match_selector(dom, &spec.selector).get(i).copied())
                .ok_or_else(|| GroundError::Unmatched(target.to_string()))?;
            match_in_scope(dom, &fspec.selector, item)
                .first()
                .copied()
                .ok_or_else(|| GroundError::Unmatched(target.to_string()))
        }
    }
}

pub fn ground_action(action: &SemanticAction, dom: &DomTree, recipe: &Recipe) -> Result<BrowserCommand, GroundError> {
    validate_action(action, recipe)?;
    let node = |t: &Option<Target>| resolve_target(t.as_ref().expect("validated"), dom, recipe);
    Ok(match action.verb {
        Verb::Click => BrowserCommand { kind: CommandKind::ClickNode, node_ref: Some(node(&action.target)?), text: None },
        Verb::Fill => BrowserCommand {
            kind: CommandKind::FillNode,
            node_ref: Some(node(&action.target)?),
            text: action.payload.clone(),
        },
        Verb::Back => BrowserCommand::bare(CommandKind::Back),
        Verb::Save => BrowserCommand::bare(CommandKind::Save),
        Verb::Stop => BrowserCommand::bare(CommandKind::Stop),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iface::dom::parse_markup;
    use crate::iface::recipe::bundled_recipe;

    const START: &str = r#"<html><body><form id="search"><input id="q" type="text" value=""><button id="go">Search</button></form></body></html>"#;
    const SERP3: &str = r#"<html><body><form id="search"><input id="q" value="x"><button id="go">Search</button></form>
        <div id="stats">3</div><ol id="results">
        <li class="result"><h3 class="title"><a class="link" data-doc="a" href="/doc/a">A</a></h3><p class="snippet">s</p></li>
        <li class="result"><h3 class="title"><a class="link" data-doc="b" href="/doc/b">B</a></h3><p class="snippet">s</p></li>
        <li class="result"><h3 class="title"><a class="link" data-doc="c" href="/doc/c">C</a></h3><p class="snippet">s</p></li>
        </ol></body></html>"#;

    #[test]
    fn click_search_button_grounds_to_button_node() {
        let recipe = bundled_recipe("simsearch-classic").unwrap();
        let dom = parse_markup(START);
        let cmd = ground_action(&SemanticAction::click_element("search_button"), &dom, &recipe).unwrap();
        assert_eq!(cmd.kind, CommandKind::ClickNode);
        let node = cmd.node_ref.unwrap();
        assert_eq!(dom.node(node).tag, "button");
        assert_eq!(dom.node(node).id(), Some("go"));
    }

    #[test]
    fn fill_carries_payload() {
        let recipe = bundled_recipe("simsearch-classic").unwrap();
        let dom = parse_markup(START);
        let cmd = ground_action(&SemanticAction::fill("query_box", "x"), &dom, &recipe).unwrap();
        assert_eq!(cmd.kind, CommandKind::FillNode);
        assert_eq!(cmd.text.as_deref(), Some("x"));
        assert_eq!(dom.node(cmd.node_ref.unwrap()).tag, "input");
    }

    #[test]
    fn out_of_range_rank_is_a_grounding_error() {
        let recipe = bundled_recipe("simsearch-classic").unwrap();
        let dom = parse_markup(SERP3);
        let rank3 = Target::Item { list: "results".into(), rank: 3, field: "link".into() };
        let cmd = ground_action(&SemanticAction::click(rank3), &dom, &recipe).unwrap();
        assert_eq!(dom.node(cmd.node_ref.unwrap()).attr("data-doc"), Some("c"));
        let rank4 = Target::Item { list: "results".into(), rank: 4, field: "link".into() };
        let err = ground_action(&SemanticAction::click(rank4), &dom, &recipe).unwrap_err();
        assert_eq!(err.code(), "grounding_failed");
    }

    #[test]
    fn unknown_and_unmatched_targets_have_distinct_codes() {
        let recipe = bundled_recipe("simsearch-classic").unwrap();
        let dom = parse_markup(START);
        let unknown = ground_action(&SemanticAction::click_element("buy_now"), &dom, &recipe).unwrap_err();
        let unmatched = ground_action(&SemanticAction::click_element("next_page"), &dom, &recipe).unwrap_err();
        assert_eq!(unknown.code(), "unknown_target");
        assert_eq!(unmatched.code(), "grounding_failed");
    }

    #[test]
    fn shape_invariants() {
        let recipe = bundled_recipe("simsearch-classic").unwrap();
        let bad_fill = SemanticAction { verb: Verb::Fill, target: Some(Target::Element("query_box".into())), payload: None };
        assert_eq!(validate_action(&bad_fill, &recipe).unwrap_err().code(), "invalid_action");
        let bad_click = SemanticAction {
            verb: Verb::Click,
            target: Some(Target::Element("search_button".into())),
            payload: Some("x".into()),
        };
        assert_eq!(validate_action(&bad_click, &recipe).unwrap_err().code(), "invalid_action");
        let fill_button = SemanticAction::fill("search_button", "x");
        assert_eq!(validate_action(&fill_button, &recipe).unwrap_err().code(), "not_actionable");
        assert!(validate_action(&SemanticAction::bare(Verb::Back), &recipe).is_ok());
    }

    #[test]
    fn target_serialization_is_untagged() {
        let a = SemanticAction::click(Target::Item { list: "results".into(), rank: 2, field: "link".into() });
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"verb":"click","target":{"list":"results","rank":2,"field":"link"}}"#);
        assert_eq!(serde_json::from_str::<SemanticAction>(&json).unwrap(), a);
        let b: SemanticAction = serde_json::from_str(r#"{"verb":"fill","target":"query_box","payload":"q1"}"#).unwrap();
        assert_eq!(b, SemanticAction::fill("query_box", "q1"));
    }
}
