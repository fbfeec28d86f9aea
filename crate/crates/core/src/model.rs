//! Simulation state, user actions and trace records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iface::{BrowserCommand, SemanticAction};
use crate::text::{content_terms, tokenize};

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("action is for step {action_step} but the state is at step {state_step}")]
    StepMismatch { action_step: u64, state_step: u64 },
    #[error("the session has already stopped")]
    AlreadyStopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub persona_id: String,
    /// Result pages tolerated without a useful click.
    pub patience_budget: u32,
    pub click_threshold: f64,
    /// Tokens per simulated second.
    pub reading_speed: f64,
    pub target_saves: u32,
}

impl Persona {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.patience_budget < 1 {
            return Err(ModelError::Config("persona.patience_budget must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.click_threshold) {
            return Err(ModelError::Config("persona.click_threshold must lie in [0, 1]".into()));
        }
        if !(self.reading_speed > 0.0 && self.reading_speed.is_finite()) {
            return Err(ModelError::Config("persona.reading_speed must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationNeed {
    pub task_id: String,
    pub description: String,
    pub need_terms: Vec<String>,
}

impl InformationNeed {
    /// Need terms are the distinct content terms of the description in
    /// first-occurrence order.
    pub fn from_description(task_id: &str, description: &str) -> Self {
        let mut need_terms: Vec<String> = Vec::new();
        for t in content_terms(description) {
            if !need_terms.contains(&t) {
                need_terms.push(t);
            }
        }
        InformationNeed { task_id: task_id.to_string(), description: description.to_string(), need_terms }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.description.trim().is_empty() {
            return Err(ModelError::Config("need.description is empty".into()));
        }
        if self.need_terms.is_empty() {
            return Err(ModelError::Config("need.need_terms is empty".into()));
        }
        let tokens = tokenize(&self.description);
        if let Some(t) = self.need_terms.iter().find(|t| !tokens.contains(t)) {
            return Err(ModelError::Config(format!("need term \"{t}\" does not occur in the description")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Query,
    Click,
    Read,
    Save,
    Back,
    Stop,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] =
        [ActionKind::Query, ActionKind::Click, ActionKind::Read, ActionKind::Save, ActionKind::Back, ActionKind::Stop];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn first_page() -> usize {
    1
}

fn is_first_page(p: &usize) -> bool {
    *p == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ActionBody {
    /// `page > 1` is a request for a further result page of the same query.
    Query {
        query: String,
        #[serde(default = "first_page", skip_serializing_if = "is_first_page")]
        page: usize,
    },
    /// `rank` is the 1-based position on the visible result page.
    Click { rank: usize, doc_id: String },
    Read { doc_id: String, dwell: f64 },
    Save { doc_id: String },
    Back,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAction {
    #[serde(flatten)]
    pub body: ActionBody,
    pub at_step: u64,
    /// Attempted but not executed (grounding or environment failure).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub failed: bool,
}

impl UserAction {
    pub fn new(body: ActionBody, at_step: u64) -> Self {
        UserAction { body, at_step, failed: false }
    }

    pub fn query(query: &str, at_step: u64) -> Self {
        Self::new(ActionBody::Query { query: query.to_string(), page: 1 }, at_step)
    }

    pub fn click(rank: usize, doc_id: &str, at_step: u64) -> Self {
        Self::new(ActionBody::Click { rank, doc_id: doc_id.to_string() }, at_step)
    }

    pub fn read(doc_id: &str, dwell: f64, at_step: u64) -> Self {
        Self::new(ActionBody::Read { doc_id: doc_id.to_string(), dwell }, at_step)
    }

    pub fn save(doc_id: &str, at_step: u64) -> Self {
        Self::new(ActionBody::Save { doc_id: doc_id.to_string() }, at_step)
    }

    pub fn back(at_step: u64) -> Self {
        Self::new(ActionBody::Back, at_step)
    }

    pub fn stop(at_step: u64) -> Self {
        Self::new(ActionBody::Stop, at_step)
    }

    pub fn kind(&self) -> ActionKind {
        match self.body {
            ActionBody::Query { .. } => ActionKind::Query,
            ActionBody::Click { .. } => ActionKind::Click,
            ActionBody::Read { .. } => ActionKind::Read,
            ActionBody::Save { .. } => ActionKind::Save,
            ActionBody::Back => ActionKind::Back,
            ActionBody::Stop => ActionKind::Stop,
        }
    }

    /// A first-page query, i.e. a new query rather than pagination.
    pub fn is_new_query(&self) -> bool {
        !self.failed && matches!(self.body, ActionBody::Query { page: 1, .. })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match &self.body {
            ActionBody::Click { rank: 0, .. } => Err(ModelError::Config("click rank must be at least 1".into())),
            ActionBody::Read { dwell, .. } if dwell.is_nan() || *dwell < 0.0 => {
                Err(ModelError::Config("dwell must be non-negative".into()))
            }
            ActionBody::Query { page: 0, .. } => Err(ModelError::Config("query page must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn failed(mut self) -> Self {
        self.failed = true;
        self
    }
}

/// Fixed simulated time per action; Read costs its dwell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub query: f64,
    pub click: f64,
    pub save: f64,
    pub back: f64,
    pub stop: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { query: 5.0, click: 1.0, save: 2.0, back: 1.0, stop: 0.0 }
    }
}

impl CostModel {
    pub fn cost(&self, action: &UserAction) -> f64 {
        if action.failed {
            return 0.0;
        }
        match &action.body {
            ActionBody::Query { .. } => self.query,
            ActionBody::Click { .. } => self.click,
            ActionBody::Read { dwell, .. } => *dwell,
            ActionBody::Save { .. } => self.save,
            ActionBody::Back => self.back,
            ActionBody::Stop => self.stop,
        }
    }

    pub fn dwell(reading_speed: f64, tokens: usize) -> f64 {
        tokens as f64 / reading_speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CognitiveParams {
    /// Added when a new query follows a result page that got no click.
    pub unproductive_query_frustration: f64,
    /// Multiplier applied to frustration on a click.
    pub click_relief: f64,
    /// Added when an attempted action fails.
    pub failure_frustration: f64,
}

impl Default for CognitiveParams {
    fn default() -> Self {
        CognitiveParams { unproductive_query_frustration: 0.2, click_relief: 0.5, failure_frustration: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CognitiveState {
    pub frustration_score: f64,
    pub satisfaction_estimate: f64,
    /// Terms harvested from clicked and read documents, with counts.
    pub known_terms: BTreeMap<String, u32>,
    pub serps_since_last_click: u32,
    pub serps_since_last_save: u32,
    /// Result pages (new queries and page turns) shown since the last click.
    #[serde(default)]
    pub pages_since_last_click: u32,
    /// Highest frustration reached so far.
    pub peak_frustration: f64,
}

/// Inputs to the cognitive update beyond the action itself.
#[derive(Debug, Clone, Copy)]
pub struct UpdateContext<'a> {
    pub params: &'a CognitiveParams,
    pub target_saves: u32,
    /// The action is a Save of a document not saved before.
    pub new_save: bool,
    /// Content terms observed through this action.
    pub observed_terms: &'a [String],
}

pub fn update_cognitive_state(cog: &CognitiveState, action: &UserAction, ctx: &UpdateContext<'_>) -> CognitiveState {
    let mut next = cog.clone();
    if action.failed {
        next.frustration_score += ctx.params.failure_frustration;
    } else {
        match &action.body {
            ActionBody::Query { page: 1, .. } => {
                if next.serps_since_last_click >= 1 {
                    next.frustration_score += ctx.params.unproductive_query_frustration;
                }
                next.serps_since_last_click += 1;
                next.serps_since_last_save += 1;
                next.pages_since_last_click += 1;
            }
            ActionBody::Query { .. } => next.pages_since_last_click += 1,
            ActionBody::Click { .. } => {
                next.frustration_score *= ctx.params.click_relief;
                next.serps_since_last_click = 0;
                next.pages_since_last_click = 0;
            }
            ActionBody::Save { .. } if ctx.new_save => {
                next.satisfaction_estimate += 1.0 / f64::from(ctx.target_saves.max(1));
                next.serps_since_last_save = 0;
            }
            _ => {}
        }
        if matches!(action.body, ActionBody::Click { .. } | ActionBody::Read { .. }) {
            for t in ctx.observed_terms {
                *next.known_terms.entry(t.clone()).or_default() += 1;
            }
        }
    }
    next.frustration_score = next.frustration_score.clamp(0.0, 1.0);
    next.satisfaction_estimate = next.satisfaction_estimate.clamp(0.0, 1.0);
    next.peak_frustration = next.peak_frustration.max(next.frustration_score);
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub persona: Persona,
    pub need: InformationNeed,
    pub history: Vec<UserAction>,
    pub cognitive: CognitiveState,
    pub step: u64,
    pub elapsed_seconds: f64,
    pub saved_docs: Vec<String>,
    pub rng_seed: u64,
    #[serde(default)]
    pub params: CognitiveParams,
}

pub fn init_state(persona: Persona, need: InformationNeed, seed: u64) -> Result<SimulationState, ModelError> {
    init_state_with(persona, need, seed, CognitiveParams::default())
}

pub fn init_state_with(
    persona: Persona,
    need: InformationNeed,
    seed: u64,
    params: CognitiveParams,
) -> Result<SimulationState, ModelError> {
    persona.validate()?;
    need.validate()?;
    Ok(SimulationState {
        persona,
        need,
        history: Vec::new(),
        cognitive: CognitiveState::default(),
        step: 0,
        elapsed_seconds: 0.0,
        saved_docs: Vec::new(),
        rng_seed: seed,
        params,
    })
}

pub fn apply_user_action(
    state: &SimulationState,
    action: UserAction,
    time_cost: f64,
) -> Result<SimulationState, ModelError> {
    apply_user_action_with(state, action, time_cost, &[])
}

/// As [`apply_user_action`], also harvesting `observed_terms` (content
/// terms of what a Click or Read exposed) into the known terms.
pub fn apply_user_action_with(
    state: &SimulationState,
    action: UserAction,
    time_cost: f64,
    observed_terms: &[String],
) -> Result<SimulationState, ModelError> {
    if action.at_step != state.step {
        return Err(ModelError::StepMismatch { action_step: action.at_step, state_step: state.step });
    }
    if state.is_stopped() {
        return Err(ModelError::AlreadyStopped);
    }
    action.validate()?;
    let mut next = state.clone();
    let mut new_save = false;
    if let (ActionBody::Save { doc_id }, false) = (&action.body, action.failed) {
        if !next.saved_docs.contains(doc_id) {
            next.saved_docs.push(doc_id.clone());
            new_save = true;
        }
    }
    let ctx = UpdateContext {
        params: &state.params,
        target_saves: state.persona.target_saves,
        new_save,
        observed_terms,
    };
    next.cognitive = update_cognitive_state(&state.cognitive, &action, &ctx);
    next.elapsed_seconds += time_cost.max(0.0);
    next.history.push(action);
    next.step += 1;
    Ok(next)
}

impl SimulationState {
    pub fn is_stopped(&self) -> bool {
        self.history.iter().any(|a| !a.failed && a.kind() == ActionKind::Stop)
    }

    /// New (first-page) queries issued.
    pub fn queries_issued(&self) -> usize {
        self.history.iter().filter(|a| a.is_new_query()).count()
    }

    pub fn clicks_total(&self) -> usize {
        self.history.iter().filter(|a| !a.failed && a.kind() == ActionKind::Click).count()
    }

    pub fn docs_saved(&self) -> usize {
        self.saved_docs.len()
    }

    pub fn last_action(&self) -> Option<&UserAction> {
        self.history.last()
    }

    /// Most recent executed query text.
    pub fn last_query(&self) -> Option<&str> {
        self.history.iter().rev().find_map(|a| match (&a.body, a.failed) {
            (ActionBody::Query { query, .. }, false) => Some(query.as_str()),
            _ => None,
        })
    }

    /// Every executed first-page query, in order.
    pub fn prior_queries(&self) -> Vec<&str> {
        self.history
            .iter()
            .filter(|a| a.is_new_query())
            .filter_map(|a| match &a.body {
                ActionBody::Query { query, .. } => Some(query.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn has_read(&self, doc_id: &str) -> bool {
        self.history.iter().any(|a| !a.failed && matches!(&a.body, ActionBody::Read { doc_id: d, .. } if d == doc_id))
    }

    pub fn has_clicked(&self, doc_id: &str) -> bool {
        self.history
            .iter()
            .any(|a| !a.failed && matches!(&a.body, ActionBody::Click { doc_id: d, .. } if d == doc_id))
    }

    /// Trailing run of failed actions.
    pub fn consecutive_failures(&self) -> usize {
        self.history.iter().rev().take_while(|a| a.failed).count()
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            queries_issued: self.queries_issued(),
            docs_saved: self.docs_saved(),
            frustration_score: self.cognitive.frustration_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub queries_issued: usize,
    pub docs_saved: usize,
    pub frustration_score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityCall {
    pub kind: String,
    pub thoughts: String,
    pub reflections: String,
}

/// A sub-record of one iteration, ordered by `seq`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub phase: String,
    pub seq: u64,
}

pub mod phases {
    pub const PERCEIVE: &str = "perceive";
    pub const SELECT: &str = "select";
    pub const GENERATE: &str = "generate";
    pub const GROUND: &str = "ground";
    pub const EXECUTE: &str = "execute";
    pub const UPDATE: &str = "update";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub format_version: u32,
    pub step: u64,
    pub wall_order: u64,
    pub chosen_component: String,
    pub capability_calls: Vec<CapabilityCall>,
    pub user_action: Option<UserAction>,
    /// Semantic actions executed this step, in order.
    pub semantic_action: Vec<SemanticAction>,
    /// Commands grounded from `semantic_action`, one-to-one.
    pub browser_command: Vec<BrowserCommand>,
    /// Digest of the perceived state after the action.
    pub observation_digest: String,
    pub state_snapshot: StateSnapshot,
    pub phases: Vec<Phase>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl TraceEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace events serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}
