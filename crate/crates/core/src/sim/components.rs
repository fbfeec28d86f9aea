//! Action generation: each registered component turns the current state
//! and page into a proposed user action plus the interface commands that
//! realize it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PreparedRun;
use crate::agent::{
    invoke_capability, remember, AgentEnv, AgentMemory, CapabilityError, CapabilityKind, CapabilityOutput,
    CapabilityResult, Provider,
};
use crate::env::EnvState;
use crate::iface::{names, PageKind, PerceivedState, SemanticAction, Target, Verb};
use crate::model::{ActionBody, CapabilityCall, CostModel, SimulationState};
use crate::simulators::{decide_clicks, generate_query, ids, AttractivenessMode, QueryError, QueryStrategy};
use crate::text::{content_term_set, fnv1a64, tokenize};

/// What a component wants to do this step.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub body: ActionBody,
    /// Interface commands, executed in order; empty for Read.
    pub commands: Vec<SemanticAction>,
}

impl Proposal {
    fn new(body: ActionBody, commands: Vec<SemanticAction>) -> Self {
        Proposal { body, commands }
    }

    pub fn stop() -> Self {
        Proposal::new(ActionBody::Stop, vec![SemanticAction::bare(Verb::Stop)])
    }

    fn search(query: String) -> Self {
        Proposal::new(
            ActionBody::Query { query: query.clone(), page: 1 },
            vec![SemanticAction::fill(names::QUERY_BOX, query), SemanticAction::click_element(names::SEARCH_BUTTON)],
        )
    }
}

#[derive(Debug)]
pub enum GenerateError {
    /// The component cannot produce an action here; the engine falls back.
    NotApplicable(String),
    /// Provider transport exhausted; the run ends.
    Fatal(CapabilityError),
}

#[derive(Debug)]
pub struct Generated {
    pub proposal: Result<Proposal, GenerateError>,
    pub calls: Vec<CapabilityCall>,
    pub notes: Vec<String>,
}

/// Mutable per-run data the components share.
pub struct Workspace<'a> {
    pub run: &'a PreparedRun,
    pub provider: Option<&'a dyn Provider>,
    pub memory: &'a mut AgentMemory,
}

fn current_serp(env: &EnvState) -> Option<(&str, usize)> {
    env.current_serp.as_ref().map(|s| (s.query.as_str(), s.page))
}

/// Click decisions for one result page come from a stream keyed by the
/// page, so returning to a page replays the same decisions.
fn page_rng(seed: u64, query: &str, page: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(format!("{query}|{page}").as_bytes()) | 1 << 63);
    rng
}

pub fn query_generation(
    state: &SimulationState,
    strategy: QueryStrategy,
    rng: &mut ChaCha8Rng,
    notes: &mut Vec<String>,
) -> Proposal {
    let q = match generate_query(state, strategy, rng) {
        Err(QueryError::NoPriorQuery) => {
            notes.push("no previous query to refine; using the need terms".into());
            generate_query(state, QueryStrategy::NeedTerms, rng)
        }
        other => other,
    };
    match q {
        Ok(q) => Proposal::search(q),
        Err(e) => {
            notes.push(format!("{e}; stopping"));
            Proposal::stop()
        }
    }
}

fn is_relevant(run: &PreparedRun, state: &SimulationState, doc_id: &str, body: &str) -> bool {
    if run.config.components.click_model.attractiveness_mode == AttractivenessMode::Judged {
        return run.grades.get(doc_id).is_some_and(|g| *g >= 1);
    }
    let terms = content_term_set(body);
    let need = &state.need.need_terms;
    let covered = need.iter().filter(|t| terms.contains(*t)).count();
    covered as f64 / need.len().max(1) as f64 >= state.persona.click_threshold
}

pub fn relevance_decision(
    run: &PreparedRun,
    state: &SimulationState,
    perceived: &PerceivedState,
    env: &EnvState,
) -> Result<Proposal, String> {
    match perceived.page_kind {
        PageKind::Doc => {
            let doc_id = perceived.element(names::DOC_REF).map(|e| e.text.trim().to_string()).unwrap_or_default();
            let body = perceived.element(names::DOC_BODY).map(|e| e.text.as_str()).unwrap_or("");
            if !state.has_read(&doc_id) {
                let dwell = CostModel::dwell(state.persona.reading_speed, tokenize(body).len());
                return Ok(Proposal::new(ActionBody::Read { doc_id, dwell }, Vec::new()));
            }
            if is_relevant(run, state, &doc_id, body) && !state.saved_docs.contains(&doc_id) {
                return Ok(Proposal::new(
                    ActionBody::Save { doc_id },
                    vec![SemanticAction::click_element(names::SAVE_BUTTON)],
                ));
            }
            Ok(Proposal::new(ActionBody::Back, vec![SemanticAction::click_element(names::BACK_LINK)]))
        }
        PageKind::Serp => {
            let results = perceived.list(names::RESULTS);
            if results.is_empty() {
                return Ok(Proposal::stop());
            }
            let (query, page) = current_serp(env).ok_or("result page without a query")?;
            let mut rng = page_rng(state.rng_seed, query, page);
            let grades = &run.grades;
            let judged = |d: &str| grades.get(d).copied();
            let decisions = decide_clicks(results, state, &run.config.components.click_model, &judged, &mut rng)
                .map_err(|e| e.to_string())?;
            let pick = decisions.iter().filter(|(_, c)| *c).find_map(|(rank, _)| {
                let doc = perceived.field(names::RESULTS, *rank, names::F_DOC_ID)?;
                (!state.has_clicked(doc)).then(|| (*rank, doc.to_string()))
            });
            if let Some((rank, doc_id)) = pick {
                let target = Target::Item { list: names::RESULTS.into(), rank, field: names::F_LINK.into() };
                return Ok(Proposal::new(ActionBody::Click { rank, doc_id }, vec![SemanticAction::click(target)]));
            }
            if perceived.element(names::NEXT_PAGE).is_some() {
                return Ok(Proposal::new(
                    ActionBody::Query { query: query.to_string(), page: page + 1 },
                    vec![SemanticAction::click_element(names::NEXT_PAGE)],
                ));
            }
            Ok(Proposal::stop())
        }
        _ => Err("no result page or document to judge".into()),
    }
}

/// Map an interface action back to the user action it amounts to.
pub fn classify_action(
    action: &SemanticAction,
    perceived: &PerceivedState,
    env: &EnvState,
) -> Result<Proposal, String> {
    let one = |body: ActionBody| Ok(Proposal::new(body, vec![action.clone()]));
    let element = |name: &str| matches!(&action.target, Some(Target::Element(n)) if n == name);
    match action.verb {
        Verb::Fill if element(names::QUERY_BOX) => {
            let q = action.payload.clone().unwrap_or_default();
            Ok(Proposal::new(
                ActionBody::Query { query: q, page: 1 },
                vec![action.clone(), SemanticAction::click_element(names::SEARCH_BUTTON)],
            ))
        }
        Verb::Click if element(names::SEARCH_BUTTON) => {
            let q = perceived.element(names::QUERY_BOX).map(|e| e.value.clone()).unwrap_or_default();
            one(ActionBody::Query { query: q, page: 1 })
        }
        Verb::Click if element(names::NEXT_PAGE) => {
            let (q, page) = current_serp(env).ok_or("next page outside a result page")?;
            one(ActionBody::Query { query: q.to_string(), page: page + 1 })
        }
        Verb::Click => match &action.target {
            Some(Target::Item { list, rank, .. }) if list == names::RESULTS => {
                let doc_id = perceived.field(names::RESULTS, *rank, names::F_DOC_ID).unwrap_or_default().to_string();
                one(ActionBody::Click { rank: *rank, doc_id })
            }
            _ if element(names::SAVE_BUTTON) => one(save_body(perceived)),
            _ if element(names::BACK_LINK) => one(ActionBody::Back),
            _ => Err(format!("cannot interpret \"{action}\" as a user action")),
        },
        Verb::Save => one(save_body(perceived)),
        Verb::Back => one(ActionBody::Back),
        Verb::Stop => one(ActionBody::Stop),
        Verb::Fill => Err(format!("cannot interpret \"{action}\" as a user action")),
    }
}

fn save_body(perceived: &PerceivedState) -> ActionBody {
    let doc_id = perceived.element(names::DOC_REF).map(|e| e.text.trim().to_string()).unwrap_or_default();
    ActionBody::Save { doc_id }
}

fn call_record(out: &CapabilityOutput) -> CapabilityCall {
    CapabilityCall {
        kind: out.capability.name().to_string(),
        thoughts: out.thoughts.clone(),
        reflections: out.reflections.clone().unwrap_or_default(),
    }
}

fn capability_for(component: &str) -> Option<CapabilityKind> {
    Some(match component {
        ids::AGENT_PERCEIVE => CapabilityKind::Perceive,
        ids::AGENT_PLAN => CapabilityKind::Plan,
        ids::AGENT_ACT => CapabilityKind::Act,
        ids::AGENT_REFLECT => CapabilityKind::Reflect,
        ids::AGENT_WONDER => CapabilityKind::Wonder,
        _ => return None,
    })
}

fn agent_component(
    kind: CapabilityKind,
    ws: &mut Workspace<'_>,
    state: &SimulationState,
    perceived: &PerceivedState,
    env: &EnvState,
) -> Generated {
    let mut out = Generated { proposal: Err(GenerateError::NotApplicable(String::new())), calls: Vec::new(), notes: Vec::new() };
    let Some(provider) = ws.provider else {
        out.proposal = Err(GenerateError::NotApplicable("agent component without a provider".into()));
        return out;
    };
    let agent_env = AgentEnv { recipe: &ws.run.recipe, prompts: &ws.run.prompts, limits: &ws.run.config.prompt_limits };
    let fail = |e: CapabilityError| {
        if e.is_fatal() {
            GenerateError::Fatal(e)
        } else {
            GenerateError::NotApplicable(e.to_string())
        }
    };
    if kind != CapabilityKind::Act {
        match invoke_capability(kind, state, perceived, ws.memory, provider, &agent_env) {
            Ok(o) => {
                out.calls.push(call_record(&o));
                remember(ws.memory, &o);
            }
            Err(e) => {
                out.proposal = Err(fail(e));
                return out;
            }
        }
    }
    out.proposal = match invoke_capability(CapabilityKind::Act, state, perceived, ws.memory, provider, &agent_env) {
        Ok(o) => {
            out.calls.push(call_record(&o));
            match &o.result {
                CapabilityResult::Action(a) => {
                    classify_action(a, perceived, env).map_err(GenerateError::NotApplicable)
                }
                _ => Err(GenerateError::NotApplicable("act returned no action".into())),
            }
        }
        Err(e) => {
            if let CapabilityError::Validation { thoughts, .. } = &e {
                out.calls.push(CapabilityCall { kind: "act".into(), thoughts: thoughts.clone(), reflections: String::new() });
            }
            Err(fail(e))
        }
    };
    out
}

/// Run the named component.
pub fn generate(
    component: &str,
    ws: &mut Workspace<'_>,
    state: &SimulationState,
    perceived: &PerceivedState,
    env: &EnvState,
    rng: &mut ChaCha8Rng,
) -> Generated {
    let mut notes = Vec::new();
    let strategies = &ws.run.config.components;
    let proposal = match component {
        ids::QUERY_GENERATION => Ok(query_generation(state, strategies.query_strategy, rng, &mut notes)),
        ids::QUERY_REFINE => Ok(query_generation(state, strategies.refine_strategy, rng, &mut notes)),
        ids::RELEVANCE_DECISION => relevance_decision(ws.run, state, perceived, env).map_err(GenerateError::NotApplicable),
        ids::STOPPING_DECISION => Ok(Proposal::stop()),
        other => match capability_for(other) {
            Some(kind) => return agent_component(kind, ws, state, perceived, env),
            None => Err(GenerateError::NotApplicable(format!("component \"{other}\" has no generator"))),
        },
    };
    Generated { proposal, calls: Vec::new(), notes }
}

/// Content terms of what an action exposes: a clicked result's title and
/// snippet, or a read document's body.
pub fn observed_terms(body: &ActionBody, perceived: &PerceivedState) -> Vec<String> {
    let text = match body {
        ActionBody::Click { rank, .. } => {
            let f = |name| perceived.field(names::RESULTS, *rank, name).unwrap_or("");
            format!("{} {}", f(names::F_TITLE), f(names::F_SNIPPET))
        }
        ActionBody::Read { .. } => perceived.element(names::DOC_BODY).map(|e| e.text.clone()).unwrap_or_default(),
        _ => return Vec::new(),
    };
    content_term_set(&text).into_iter().collect()
}
