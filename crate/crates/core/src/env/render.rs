//! Deterministic page templates for the simulated search site.
//!
//! Each theme is paired with the bundled recipe of the same id. While
//! emitting markup the renderer counts elements in document order, so it
//! knows which node index every interactive control will receive from the
//! parser (the synthetic document node takes index 0).

use thiserror::Error;

use super::browser::{EnvState, PageKind};
use super::corpus::CorpusIndex;
use super::serp::Serp;
use crate::iface::dom::{escape, NodeRef};

pub const THEME_CLASSIC: &str = "simsearch-classic";
pub const THEME_CARDS: &str = "simsearch-cards";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Control {
    QueryInput,
    SearchButton,
    ResultLink { doc_id: String },
    NextPage,
    SaveButton,
    BackLink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPage {
    pub markup: String,
    /// Number of elements emitted.
    pub element_count: usize,
    /// Interactive controls keyed by their document-order node index.
    pub controls: Vec<(NodeRef, Control)>,
}

impl RenderedPage {
    pub fn control_at(&self, node: NodeRef) -> Option<&Control> {
        self.controls.iter().find(|(n, _)| *n == node).map(|(_, c)| c)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("unknown recipe/theme id \"{0}\"")]
    UnknownRecipe(String),
    #[error("document \"{0}\" is not in the corpus")]
    MissingDocument(String),
}

pub fn theme_ids() -> [&'static str; 2] {
    [THEME_CLASSIC, THEME_CARDS]
}

struct Builder {
    out: String,
    next_index: NodeRef,
    stack: Vec<&'static str>,
    controls: Vec<(NodeRef, Control)>,
}

impl Builder {
    fn new() -> Self {
        Builder { out: String::from("<!doctype html>\n"), next_index: 1, stack: Vec::new(), controls: Vec::new() }
    }

    fn start(&mut self, tag: &'static str, attrs: &[(&str, &str)]) -> NodeRef {
        let idx = self.next_index;
        self.next_index += 1;
        self.out.push('<');
        self.out.push_str(tag);
        for (k, v) in attrs {
            self.out.push_str(&format!(" {k}=\"{}\"", escape(v)));
        }
        self.out.push('>');
        idx
    }

    fn open(&mut self, tag: &'static str, attrs: &[(&str, &str)]) -> NodeRef {
        let idx = self.start(tag, attrs);
        self.stack.push(tag);
        idx
    }

    fn void(&mut self, tag: &'static str, attrs: &[(&str, &str)]) -> NodeRef {
        self.start(tag, attrs)
    }

    fn text(&mut self, text: &str) {
        self.out.push_str(&escape(text));
    }

    fn close(&mut self) {
        let tag = self.stack.pop().expect("balanced template");
        self.out.push_str(&format!("</{tag}>"));
    }

    fn leaf(&mut self, tag: &'static str, attrs: &[(&str, &str)], text: &str) -> NodeRef {
        let idx = self.open(tag, attrs);
        self.text(text);
        self.close();
        idx
    }

    fn newline(&mut self) {
        self.out.push('\n');
    }

    fn control(&mut self, idx: NodeRef, control: Control) {
        self.controls.push((idx, control));
    }

    fn finish(self) -> RenderedPage {
        assert!(self.stack.is_empty(), "unbalanced template");
        RenderedPage { markup: self.out, element_count: self.next_index - 1, controls: self.controls }
    }
}

fn page_label(kind: PageKind) -> &'static str {
    match kind {
        PageKind::StartPage => "start",
        PageKind::SerpPage => "serp",
        PageKind::DocPage => "doc",
    }
}

pub fn render_page(env: &EnvState, index: &CorpusIndex, recipe_id: &str) -> Result<RenderedPage, RenderError> {
    let doc = match (&env.current_page, &env.current_doc) {
        (PageKind::DocPage, Some(id)) => {
            Some(index.get(id).ok_or_else(|| RenderError::MissingDocument(id.clone()))?)
        }
        _ => None,
    };
    let saved = env.current_doc.as_ref().is_some_and(|d| env.saved.contains(d));
    let serp = env.current_serp.as_ref().filter(|_| env.current_page == PageKind::SerpPage);
    let mut b = Builder::new();
    match recipe_id {
        THEME_CLASSIC => classic(&mut b, env, serp, doc.map(|d| (d.doc_id.as_str(), d.title.as_str(), d.body.as_str())), saved),
        THEME_CARDS => cards(&mut b, env, serp, doc.map(|d| (d.doc_id.as_str(), d.title.as_str(), d.body.as_str())), saved),
        other => return Err(RenderError::UnknownRecipe(other.to_string())),
    }
    Ok(b.finish())
}

type DocView<'a> = Option<(&'a str, &'a str, &'a str)>;

fn classic(b: &mut Builder, env: &EnvState, serp: Option<&Serp>, doc: DocView<'_>, saved: bool) {
    b.open("html", &[("lang", "en")]);
    b.open("head", &[]);
    b.void("meta", &[("charset", "utf-8")]);
    b.leaf("title", &[], "SimSearch");
    b.close();
    b.newline();
    b.open("body", &[("class", &format!("page-{}", page_label(env.current_page)))]);
    b.open("header", &[]);
    b.open("form", &[("id", "search"), ("action", "/search"), ("method", "get")]);
    let input = b.void("input", &[("id", "q"), ("name", "q"), ("type", "text"), ("value", &env.query_input)]);
    b.control(input, Control::QueryInput);
    let go = b.leaf("button", &[("id", "go"), ("type", "submit")], "Search");
    b.control(go, Control::SearchButton);
    b.close();
    b.close();
    b.newline();
    if let Some(serp) = serp {
        b.open("main", &[]);
        b.leaf("div", &[("id", "stats")], &format!("{} results", serp.total_hits));
        b.open("ol", &[("id", "results")]);
        for r in &serp.results {
            b.newline();
            b.open("li", &[("class", "result"), ("data-rank", &r.rank.to_string())]);
            b.open("h3", &[("class", "title")]);
            let link = b.leaf("a", &[("class", "link"), ("href", &format!("/doc/{}", r.doc_id)), ("data-doc", &r.doc_id)], &r.title);
            b.control(link, Control::ResultLink { doc_id: r.doc_id.clone() });
            b.close();
            b.leaf("p", &[("class", "snippet")], &r.snippet);
            b.close();
        }
        b.close();
        if !serp.results.is_empty() {
            let next = b.leaf("a", &[("id", "next"), ("href", &format!("/search?page={}", serp.page + 1))], "Next");
            b.control(next, Control::NextPage);
        }
        b.close();
        b.newline();
    }
    if let Some((id, title, body)) = doc {
        b.open("main", &[]);
        b.open("article", &[("id", "doc"), ("data-doc", id)]);
        b.leaf("h1", &[("class", "doc-title")], title);
        b.open("p", &[("class", "doc-meta")]);
        b.text("Document ");
        b.leaf("span", &[("class", "doc-id")], id);
        b.close();
        b.leaf("div", &[("class", "doc-body")], body);
        b.close();
        if saved {
            b.leaf("span", &[("class", "saved-flag")], "Saved");
        }
        let save = b.leaf("button", &[("id", "save"), ("type", "button")], "Save");
        b.control(save, Control::SaveButton);
        let back = b.leaf("a", &[("id", "back"), ("href", "#back")], "Back");
        b.control(back, Control::BackLink);
        b.close();
        b.newline();
    }
    b.close();
    b.close();
    b.newline();
}

fn cards(b: &mut Builder, env: &EnvState, serp: Option<&Serp>, doc: DocView<'_>, saved: bool) {
    b.open("html", &[]);
    b.open("head", &[]);
    b.leaf("title", &[], "Cards");
    b.close();
    b.open("body", &[("data-view", page_label(env.current_page))]);
    b.newline();
    b.open("div", &[("class", "topbar")]);
    let input = b.void("input", &[("class", "search-input"), ("name", "query"), ("value", &env.query_input)]);
    b.control(input, Control::QueryInput);
    let go = b.leaf("button", &[("class", "search-submit")], "Go");
    b.control(go, Control::SearchButton);
    b.close();
    b.newline();
    if let Some(serp) = serp {
        b.open("section", &[("class", "hits")]);
        b.leaf("p", &[("class", "hit-count")], &format!("{} hits", serp.total_hits));
        for r in &serp.results {
            b.newline();
            b.open("div", &[("class", "card hit"), ("data-rank", &r.rank.to_string())]);
            let link = b.open("a", &[("class", "hit-link"), ("data-id", &r.doc_id), ("href", &format!("/d/{}", r.doc_id))]);
            b.control(link, Control::ResultLink { doc_id: r.doc_id.clone() });
            b.leaf("span", &[("class", "hit-title")], &r.title);
            b.close();
            b.leaf("div", &[("class", "hit-text")], &r.snippet);
            b.close();
        }
        b.close();
        if !serp.results.is_empty() {
            b.open("nav", &[("class", "pager")]);
            let next = b.leaf("a", &[("class", "pager-next"), ("href", &format!("?p={}", serp.page + 1))], "More");
            b.control(next, Control::NextPage);
            b.close();
        }
        b.newline();
    }
    if let Some((id, title, body)) = doc {
        b.open("section", &[("class", "reader")]);
        b.leaf("h2", &[("class", "reader-title")], title);
        b.leaf("small", &[("class", "reader-id")], id);
        b.leaf("div", &[("class", "reader-text")], body);
        b.open("div", &[("class", "reader-actions")]);
        if saved {
            b.leaf("em", &[("class", "badge-saved")], "saved");
        }
        let save = b.leaf("button", &[("class", "reader-save")], "Save");
        b.control(save, Control::SaveButton);
        let back = b.leaf("a", &[("class", "reader-back"), ("href", "#")], "Back");
        b.control(back, Control::BackLink);
        b.close();
        b.close();
        b.newline();
    }
    b.close();
    b.close();
    b.newline();
}
