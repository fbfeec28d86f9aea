//! Capability invocation: prompt, provider call with retries, parse, validate.

use thiserror::Error;

use super::prompt::{actions_section, AgentMemory, PromptContext, PromptLimits, PromptSet};
use super::provider::{Provider, ProviderError};
use super::response::{
    parse_structured_response, CapabilityKind, CapabilityOutput, CapabilityResult, ParseError, Parsed, ProviderRequest,
};
use crate::iface::{validate_action, GroundError, PerceivedState, Recipe, SemanticAction};
use crate::model::SimulationState;

/// Retries after the first failed transport attempt.
pub const PROVIDER_RETRIES: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CapabilityError {
    #[error("provider failed after {attempts} attempts: {last}")]
    Provider { attempts: usize, last: ProviderError },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("act produced an action the recipe rejects ({action}): {error}")]
    Validation { action: Box<SemanticAction>, error: GroundError, thoughts: String },
}

impl CapabilityError {
    /// Transport exhaustion ends a run; the others are recoverable.
    pub fn is_fatal(&self) -> bool {
        matches!(self, CapabilityError::Provider { .. })
    }

    pub fn raw_response(&self) -> Option<&str> {
        match self {
            CapabilityError::Parse(e) => Some(&e.raw),
            _ => None,
        }
    }
}

/// Send a request, retrying transport failures, and parse the reply.
pub fn call_provider(provider: &dyn Provider, request: &ProviderRequest) -> Result<Parsed, CapabilityError> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match provider.complete(request) {
            Ok(raw) => return Ok(parse_structured_response(&raw, request.schema_id)?),
            Err(last) if attempts > PROVIDER_RETRIES => return Err(CapabilityError::Provider { attempts, last }),
            Err(_) => continue,
        }
    }
}

/// Read-only inputs shared by every capability call in a run.
#[derive(Debug, Clone, Copy)]
pub struct AgentEnv<'a> {
    pub recipe: &'a Recipe,
    pub prompts: &'a PromptSet,
    pub limits: &'a PromptLimits,
}

pub fn build_capability_request(
    kind: CapabilityKind,
    state: &SimulationState,
    perceived: &PerceivedState,
    memory: &AgentMemory,
    env: &AgentEnv<'_>,
) -> ProviderRequest {
    let mut ctx = PromptContext::new(state, perceived, memory, env.limits);
    if kind == CapabilityKind::Act {
        ctx.actions = actions_section(env.recipe);
    }
    ProviderRequest {
        capability: Some(kind),
        prompt: ctx.render(env.prompts.for_capability(kind), env.limits.max_chars),
        schema_id: kind.schema_id(),
    }
}

/// Invoke one capability. Act results are checked against the recipe and
/// returned only if valid. Neither the state nor the memory is modified.
pub fn invoke_capability(
    kind: CapabilityKind,
    state: &SimulationState,
    perceived: &PerceivedState,
    memory: &AgentMemory,
    provider: &dyn Provider,
    env: &AgentEnv<'_>,
) -> Result<CapabilityOutput, CapabilityError> {
    let request = build_capability_request(kind, state, perceived, memory, env);
    let output = match call_provider(provider, &request)? {
        Parsed::Capability(out) => out,
        Parsed::Selection(_) => unreachable!("capability schemas never parse as selections"),
    };
    if let CapabilityResult::Action(action) = &output.result {
        if let Err(error) = validate_action(action, env.recipe) {
            return Err(CapabilityError::Validation { action: Box::new(action.clone()), error, thoughts: output.thoughts });
        }
    }
    Ok(output)
}

/// Fold a non-Act output into the agent's notes.
pub fn remember(memory: &mut AgentMemory, output: &CapabilityOutput) {
    match &output.result {
        CapabilityResult::Summary(s) => memory.last_summary = Some(s.clone()),
        CapabilityResult::SubGoals(goals) => memory.sub_goals = goals.clone(),
        CapabilityResult::Adjustment(a) => memory.adjustments.push(a.clone()),
        CapabilityResult::Questions(q) => memory.questions.extend(q.iter().cloned()),
        CapabilityResult::Action(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::provider::{Script, ScriptedProvider};
    use crate::iface::{bundled_recipe, PageKind};
    use crate::model::{init_state, InformationNeed, Persona};

    fn fixture() -> (SimulationState, PerceivedState, Recipe) {
        let persona = Persona {
            persona_id: "p".into(),
            patience_budget: 3,
            click_threshold: 0.2,
            reading_speed: 4.0,
            target_saves: 1,
        };
        let state = init_state(persona, InformationNeed::from_description("t", "train ticket refund"), 7).unwrap();
        let page = PerceivedState { page_kind: PageKind::Start, elements: Default::default(), lists: Default::default() };
        (state, page, bundled_recipe("simsearch-classic").unwrap())
    }

    fn run(kind: CapabilityKind, script: &str) -> Result<CapabilityOutput, CapabilityError> {
        let (state, page, recipe) = fixture();
        let provider = ScriptedProvider::new(Script::parse(script).unwrap());
        let (prompts, limits) = (PromptSet::default(), PromptLimits::default());
        let env = AgentEnv { recipe: &recipe, prompts: &prompts, limits: &limits };
        invoke_capability(kind, &state, &page, &AgentMemory::default(), &provider, &env)
    }

    #[test]
    fn act_passes_through_scripted_action() {
        let out = run(
            CapabilityKind::Act,
            r#"[{"thoughts":"start","action":{"verb":"fill","target":"query_box","payload":"q1"}}]"#,
        )
        .unwrap();
        assert_eq!(out.thoughts, "start");
        assert_eq!(out.result, CapabilityResult::Action(SemanticAction::fill("query_box", "q1")));
    }

    #[test]
    fn wonder_returns_script_verbatim() {
        let out = run(CapabilityKind::Wonder, r#"[{"thoughts":"t","questions":["b?","a?"]}]"#).unwrap();
        assert_eq!(out.result, CapabilityResult::Questions(vec!["b?".into(), "a?".into()]));
    }

    #[test]
    fn unknown_target_is_rejected() {
        let err = run(CapabilityKind::Act, r#"[{"thoughts":"t","action":{"verb":"click","target":"buy_now"}}]"#)
            .unwrap_err();
        assert!(matches!(err, CapabilityError::Validation { error: GroundError::UnknownTarget(_), .. }));
    }

    #[test]
    fn transport_retried_twice() {
        let ok = run(
            CapabilityKind::Plan,
            r#"[{"transport_error":"a"},{"transport_error":"b"},{"thoughts":"t","sub_goals":[]}]"#,
        );
        assert!(ok.is_ok());
        let err = run(
            CapabilityKind::Plan,
            r#"[{"transport_error":"a"},{"transport_error":"b"},{"transport_error":"c"},{"thoughts":"t","sub_goals":[]}]"#,
        )
        .unwrap_err();
        assert_eq!(err, CapabilityError::Provider { attempts: 3, last: ProviderError::Transport("c".into()) });
    }

    #[test]
    fn invocation_leaves_state_untouched() {
        let (state, page, recipe) = fixture();
        let before = serde_json::to_string(&state).unwrap();
        let provider = ScriptedProvider::from_entries(vec![]);
        let (prompts, limits) = (PromptSet::default(), PromptLimits::default());
        let env = AgentEnv { recipe: &recipe, prompts: &prompts, limits: &limits };
        let _ = invoke_capability(CapabilityKind::Perceive, &state, &page, &AgentMemory::default(), &provider, &env);
        assert_eq!(serde_json::to_string(&state).unwrap(), before);
    }
}
