//! Prompt templates and the context sections substituted into them.
//!
//! Templates are plain text with `{{name}}` placeholders. The bundled set is
//! compiled in; a directory with same-named files overrides any of them.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::response::CapabilityKind;
use crate::iface::recipe::{EntryAction, Role};
use crate::iface::{names, PageKind, PerceivedState, Recipe};
use crate::model::{ActionBody, SimulationState, UserAction};
use crate::simulators::ComponentInfo;
use crate::text::truncate_chars;

pub const DEFAULT_HISTORY_WINDOW: usize = 10;
pub const DEFAULT_PROMPT_CAP: usize = 8000;
const ENTRY_CHARS: usize = 160;
const KNOWN_TERMS_SHOWN: usize = 20;
const BODY_CHARS: usize = 600;
const TRUNCATION_MARK: &str = "\n[page truncated]";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub perceive: String,
    pub plan: String,
    pub act: String,
    pub reflect: String,
    pub wonder: String,
    pub select: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            perceive: include_str!("../../prompts/perceive.txt").to_string(),
            plan: include_str!("../../prompts/plan.txt").to_string(),
            act: include_str!("../../prompts/act.txt").to_string(),
            reflect: include_str!("../../prompts/reflect.txt").to_string(),
            wonder: include_str!("../../prompts/wonder.txt").to_string(),
            select: include_str!("../../prompts/select.txt").to_string(),
        }
    }
}

impl PromptSet {
    /// Bundled templates, with `<name>.txt` files in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut set = PromptSet::default();
        for (file, slot) in [
            ("perceive.txt", &mut set.perceive),
            ("plan.txt", &mut set.plan),
            ("act.txt", &mut set.act),
            ("reflect.txt", &mut set.reflect),
            ("wonder.txt", &mut set.wonder),
            ("select.txt", &mut set.select),
        ] {
            let path = dir.join(file);
            if path.exists() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(set)
    }

    pub fn for_capability(&self, kind: CapabilityKind) -> &str {
        match kind {
            CapabilityKind::Perceive => &self.perceive,
            CapabilityKind::Plan => &self.plan,
            CapabilityKind::Act => &self.act,
            CapabilityKind::Reflect => &self.reflect,
            CapabilityKind::Wonder => &self.wonder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptLimits {
    pub history_window: usize,
    /// Upper bound on prompt length in characters.
    pub max_chars: usize,
}

impl Default for PromptLimits {
    fn default() -> Self {
        PromptLimits { history_window: DEFAULT_HISTORY_WINDOW, max_chars: DEFAULT_PROMPT_CAP }
    }
}

/// Notes the agent accumulates within one run. Never part of the
/// simulation state, so capabilities cannot mutate it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMemory {
    pub sub_goals: Vec<String>,
    pub questions: Vec<String>,
    pub adjustments: Vec<String>,
    pub last_summary: Option<String>,
}

impl AgentMemory {
    pub fn is_empty(&self) -> bool {
        self.sub_goals.is_empty() && self.questions.is_empty() && self.adjustments.is_empty() && self.last_summary.is_none()
    }
}

fn clip(text: &str) -> String {
    let flat = text.replace(['\n', '\r'], " ");
    let cut = truncate_chars(&flat, ENTRY_CHARS);
    if cut.len() < flat.len() {
        format!("{cut}...")
    } else {
        flat
    }
}

pub fn persona_section(state: &SimulationState) -> String {
    let p = &state.persona;
    format!(
        "persona_id: {}\npatience_budget: {}\nclick_threshold: {}\nreading_speed: {}\ntarget_saves: {}",
        clip(&p.persona_id),
        p.patience_budget,
        p.click_threshold,
        p.reading_speed,
        p.target_saves
    )
}

pub fn need_section(state: &SimulationState) -> String {
    format!("{}\nkey terms: {}", clip(&state.need.description), clip(&state.need.need_terms.join(", ")))
}

pub fn describe_action(action: &UserAction) -> String {
    let body = match &action.body {
        ActionBody::Query { query, page: 1 } => format!("query \"{}\"", clip(query)),
        ActionBody::Query { query, page } => format!("open page {page} of \"{}\"", clip(query)),
        ActionBody::Click { rank, doc_id } => format!("click result {rank} ({})", clip(doc_id)),
        ActionBody::Read { doc_id, dwell } => format!("read {} for {dwell:.1}s", clip(doc_id)),
        ActionBody::Save { doc_id } => format!("save {}", clip(doc_id)),
        ActionBody::Back => "go back".to_string(),
        ActionBody::Stop => "stop".to_string(),
    };
    let failed = if action.failed { " [failed]" } else { "" };
    format!("step {}: {body}{failed}", action.at_step)
}

pub fn history_section(state: &SimulationState, window: usize) -> String {
    let skip = state.history.len().saturating_sub(window);
    let lines: Vec<String> = state.history[skip..].iter().map(describe_action).collect();
    if lines.is_empty() {
        "(none yet)".to_string()
    } else {
        lines.join("\n")
    }
}

/// One field per line, so a change to one value changes one line.
pub fn cognitive_section(state: &SimulationState) -> String {
    let c = &state.cognitive;
    let mut terms: Vec<(&String, &u32)> = c.known_terms.iter().collect();
    terms.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let shown: Vec<&str> = terms.iter().take(KNOWN_TERMS_SHOWN).map(|(t, _)| t.as_str()).collect();
    format!(
        "frustration_score: {:.3}\nsatisfaction_estimate: {:.3}\nserps_since_last_click: {}\nserps_since_last_save: {}\ndocs_saved: {}\nelapsed_seconds: {:.1}\nknown_terms: {}",
        c.frustration_score,
        c.satisfaction_estimate,
        c.serps_since_last_click,
        c.serps_since_last_save,
        state.saved_docs.len(),
        state.elapsed_seconds,
        if shown.is_empty() { "(none)".to_string() } else { clip(&shown.join(", ")) }
    )
}

pub fn memory_section(memory: &AgentMemory) -> String {
    if memory.is_empty() {
        return "(none)".to_string();
    }
    let mut out = String::new();
    if let Some(s) = &memory.last_summary {
        let _ = writeln!(out, "page summary: {}", clip(s));
    }
    for (label, items) in [("plan", &memory.sub_goals), ("open question", &memory.questions), ("adjustment", &memory.adjustments)] {
        for item in items.iter().rev().take(5).rev() {
            let _ = writeln!(out, "{label}: {}", clip(item));
        }
    }
    out.trim_end().to_string()
}

pub fn perceived_section(perceived: &PerceivedState) -> String {
    let mut out = String::new();
    let kind = match perceived.page_kind {
        PageKind::Start => "start page",
        PageKind::Serp => "search results page",
        PageKind::Doc => "document page",
        PageKind::Unknown => "unrecognized page",
    };
    let _ = writeln!(out, "page: {kind}");
    if let Some(q) = perceived.element(names::QUERY_BOX) {
        let _ = writeln!(out, "search box contains: \"{}\"", q.value);
    }
    if let Some(stats) = perceived.element(names::RESULT_STATS) {
        let _ = writeln!(out, "result stats: {}", stats.text.trim());
    }
    for (i, record) in perceived.list(names::RESULTS).iter().enumerate() {
        let field = |f: &str| record.get(f).cloned().flatten().unwrap_or_default();
        let _ = writeln!(
            out,
            "{}. {} [{}]\n   {}",
            i + 1,
            field(names::F_TITLE).trim(),
            field(names::F_DOC_ID),
            field(names::F_SNIPPET).trim()
        );
    }
    if perceived.element(names::NEXT_PAGE).is_some() {
        let _ = writeln!(out, "a next-page link is available");
    }
    if let Some(title) = perceived.element(names::DOC_TITLE) {
        let _ = writeln!(out, "document title: {}", title.text.trim());
    }
    if let Some(doc) = perceived.element(names::DOC_REF) {
        let _ = writeln!(out, "document id: {}", doc.text.trim());
    }
    if let Some(body) = perceived.element(names::DOC_BODY) {
        let text = body.text.trim();
        let cut = truncate_chars(text, BODY_CHARS);
        let _ = writeln!(out, "document text: {cut}{}", if cut.len() < text.len() { "..." } else { "" });
    }
    if let Some(flag) = perceived.element(names::SAVED_FLAG) {
        let _ = writeln!(out, "saved status: {}", flag.text.trim());
    }
    out.trim_end().to_string()
}

/// Action forms the recipe makes available.
pub fn actions_section(recipe: &Recipe) -> String {
    let mut out = String::new();
    for (name, spec) in &recipe.elements {
        match (spec.action, spec.role) {
            (Some(EntryAction::Fill), _) | (None, Role::Input) => {
                let _ = writeln!(out, "fill {name} with text");
            }
            (Some(EntryAction::Click), _) | (None, Role::Button | Role::Link) => {
                let _ = writeln!(out, "click {name}");
            }
            _ => {}
        }
    }
    for (list, spec) in &recipe.lists {
        for (field, f) in &spec.fields {
            if f.action == Some(EntryAction::Click) {
                let _ = writeln!(out, "click {list} item <rank> field {field}");
            }
        }
    }
    out.push_str("save (current document)\nback\nstop");
    out
}

pub fn components_section(components: &[ComponentInfo]) -> String {
    components.iter().map(|c| format!("- {}: {}", c.id, c.description)).collect::<Vec<_>>().join("\n")
}

/// Everything a template may reference.
#[derive(Debug, Clone, Default)]
pub struct PromptContext {
    pub persona: String,
    pub need: String,
    pub history: String,
    pub cognitive: String,
    pub memory: String,
    pub perceived: String,
    pub actions: String,
    pub components: String,
}

impl PromptContext {
    pub fn new(state: &SimulationState, perceived: &PerceivedState, memory: &AgentMemory, limits: &PromptLimits) -> Self {
        PromptContext {
            persona: persona_section(state),
            need: need_section(state),
            history: history_section(state, limits.history_window),
            cognitive: cognitive_section(state),
            memory: memory_section(memory),
            perceived: perceived_section(perceived),
            actions: String::new(),
            components: String::new(),
        }
    }

    fn substitute(&self, template: &str, perceived: &str) -> String {
        template
            .replace("{{persona}}", &self.persona)
            .replace("{{need}}", &self.need)
            .replace("{{history}}", &self.history)
            .replace("{{cognitive}}", &self.cognitive)
            .replace("{{memory}}", &self.memory)
            .replace("{{actions}}", &self.actions)
            .replace("{{components}}", &self.components)
            .replace("{{perceived}}", perceived)
    }

    /// Fill the template, shortening the page description first when the
    /// result would exceed `cap` characters.
    pub fn render(&self, template: &str, cap: usize) -> String {
        let full = self.substitute(template, &self.perceived);
        if full.chars().count() <= cap {
            return full;
        }
        let fixed = self.substitute(template, "").chars().count();
        let room = cap.saturating_sub(fixed + TRUNCATION_MARK.len());
        let page = format!("{}{TRUNCATION_MARK}", truncate_chars(&self.perceived, room));
        let out = self.substitute(template, &page);
        truncate_chars(&out, cap).to_string()
    }
}
