//! Page-level state of the simulated site and the command consumer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corpus::CorpusIndex;
use super::render::{render_page, Control, RenderError};
use super::serp::{execute_query, Serp};
use crate::iface::{BrowserCommand, CommandKind, NodeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PageKind {
    #[default]
    StartPage,
    SerpPage,
    DocPage,
}

/// A visited page, enough to restore it exactly on Back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub page: PageKind,
    pub serp: Option<Serp>,
    pub doc: Option<String>,
    pub query_input: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EnvState {
    pub current_page: PageKind,
    pub current_serp: Option<Serp>,
    pub current_doc: Option<String>,
    pub nav_stack: Vec<PageSnapshot>,
    /// Current contents of the query box.
    pub query_input: String,
    /// Documents saved so far, in save order.
    pub saved: Vec<String>,
}

impl EnvState {
    pub fn start() -> Self {
        EnvState::default()
    }

    fn snapshot(&self) -> PageSnapshot {
        PageSnapshot {
            page: self.current_page,
            serp: self.current_serp.clone(),
            doc: self.current_doc.clone(),
            query_input: self.query_input.clone(),
        }
    }

    fn restore(&mut self, snap: PageSnapshot) {
        self.current_page = snap.page;
        self.current_serp = snap.serp;
        self.current_doc = snap.doc;
        self.query_input = snap.query_input;
    }

    fn navigate(&mut self, page: PageKind, serp: Option<Serp>, doc: Option<String>) {
        self.nav_stack.push(self.snapshot());
        self.current_page = page;
        if serp.is_some() || page != PageKind::DocPage {
            self.current_serp = serp;
        }
        self.current_doc = doc;
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("node {0} is not an interactive element on the current page")]
    NoSuchControl(NodeRef),
    #[error("node {node} cannot receive {kind:?}")]
    WrongControl { node: NodeRef, kind: CommandKind },
    #[error("{0:?} requires a node reference")]
    MissingNode(CommandKind),
    #[error("save is only possible on a document page")]
    NotOnDocument,
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub env: EnvState,
    /// Set when the command was accepted but changed nothing (e.g. Back with
    /// an empty history).
    pub noop: Option<String>,
    /// A result page produced by this command.
    pub executed: Option<Serp>,
}

/// Apply one command. Node commands are resolved against the page as
/// rendered for `recipe_id`, exactly what the caller perceived.
pub fn apply_command(
    index: &CorpusIndex,
    env: &EnvState,
    cmd: &BrowserCommand,
    recipe_id: &str,
    page_size: usize,
) -> Result<Transition, EnvError> {
    let mut next = env.clone();
    let mut noop = None;
    let mut executed = None;
    let control = match cmd.kind {
        CommandKind::ClickNode | CommandKind::FillNode => {
            let node = cmd.node_ref.ok_or(EnvError::MissingNode(cmd.kind))?;
            let page = render_page(env, index, recipe_id)?;
            Some((node, page.control_at(node).cloned().ok_or(EnvError::NoSuchControl(node))?))
        }
        _ => None,
    };
    match (cmd.kind, control) {
        (CommandKind::FillNode, Some((_, Control::QueryInput))) => {
            next.query_input = cmd.text.clone().unwrap_or_default();
        }
        (CommandKind::ClickNode, Some((_, Control::SearchButton))) => {
            let serp = execute_query(index, &next.query_input, 1, page_size);
            executed = Some(serp.clone());
            next.navigate(PageKind::SerpPage, Some(serp), None);
        }
        (CommandKind::ClickNode, Some((_, Control::NextPage))) => {
            let current = env.current_serp.as_ref().expect("next link only rendered on result pages");
            let serp = execute_query(index, &current.query, current.page + 1, page_size);
            executed = Some(serp.clone());
            next.query_input = serp.query.clone();
            next.navigate(PageKind::SerpPage, Some(serp), None);
        }
        (CommandKind::ClickNode, Some((_, Control::ResultLink { doc_id }))) => {
            next.navigate(PageKind::DocPage, None, Some(doc_id));
        }
        (CommandKind::ClickNode, Some((_, Control::SaveButton))) | (CommandKind::Save, None) => {
            match (&env.current_page, &env.current_doc) {
                (PageKind::DocPage, Some(doc)) => {
                    if next.saved.contains(doc) {
                        noop = Some(format!("{doc} already saved"));
                    } else {
                        next.saved.push(doc.clone());
                    }
                }
                _ => return Err(EnvError::NotOnDocument),
            }
        }
        (CommandKind::ClickNode, Some((_, Control::BackLink))) | (CommandKind::Back, None) => match next.nav_stack.pop() {
            Some(snap) => next.restore(snap),
            None => noop = Some("back with empty navigation history".to_string()),
        },
        (CommandKind::Stop, None) => {}
        (kind, Some((node, _))) => return Err(EnvError::WrongControl { node, kind }),
        (kind, None) => unreachable!("{kind:?} without a control was handled above"),
    }
    Ok(Transition { env: next, noop, executed })
}
