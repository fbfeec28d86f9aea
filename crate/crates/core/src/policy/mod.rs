//! Orchestration policies: map the simulation state to the component that
//! generates the next action.

pub mod features;
pub mod forest;
pub mod label;
pub mod rules;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use features::{extract_features, FeatureVector, COGNITIVE_FEATURES, FEATURE_DIM, FEATURE_NAMES};
pub use forest::{read_dataset, train_policy, Classifier, Forest, LabeledDecision, TrainConfig, TrainError};
pub use label::{label_sessions, LabeledSessions};
pub use rules::{parse_rules, Expr, RuleError, RulePolicy};

use crate::agent::prompt::components_section;
use crate::agent::{call_provider, AgentMemory, CapabilityError, Parsed, PromptContext, PromptLimits, PromptSet, Provider};
use crate::agent::{ProviderRequest, SchemaId};
use crate::iface::PerceivedState;
use crate::model::{CapabilityCall, SimulationState};
use crate::simulators::{ComponentRef, Registry, UnknownComponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Hand-written threshold rules.
    OrisS,
    /// Trained classifier.
    OrisMl,
    /// Model-reasoned selection.
    OrisA,
}

#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub classifier: Arc<dyn Classifier>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgenticPolicy {
    /// Used when the model names an unregistered component or replies
    /// with something unparseable.
    pub default: String,
}

#[derive(Debug, Clone)]
pub enum Policy {
    Rules(RulePolicy),
    Learned(LearnedPolicy),
    Agentic(AgenticPolicy),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error(transparent)]
    Unknown(#[from] UnknownComponent),
    #[error("the prompt-reasoned policy needs a provider")]
    NoProvider,
    #[error("component selection failed: {0}")]
    Provider(CapabilityError),
}

/// Everything a selection may consult beyond state and page.
#[derive(Clone, Copy)]
pub struct SelectContext<'a> {
    pub registry: &'a Registry,
    pub provider: Option<&'a dyn Provider>,
    pub memory: &'a AgentMemory,
    pub prompts: &'a PromptSet,
    pub limits: &'a PromptLimits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selected {
    pub component: ComponentRef,
    /// The reasoning call, for the prompt-reasoned policy.
    pub call: Option<CapabilityCall>,
    pub warnings: Vec<String>,
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Rules(_) => PolicyKind::OrisS,
            Policy::Learned(_) => PolicyKind::OrisMl,
            Policy::Agentic(_) => PolicyKind::OrisA,
        }
    }

    /// Every component id the policy can return without consulting a model.
    pub fn static_components(&self) -> Vec<String> {
        match self {
            Policy::Rules(r) => r.components().map(str::to_string).collect(),
            Policy::Learned(l) => l.classifier.labels().to_vec(),
            Policy::Agentic(a) => vec![a.default.clone()],
        }
    }

    pub fn check_components(&self, registry: &Registry) -> Result<(), UnknownComponent> {
        self.static_components().iter().try_for_each(|c| registry.get(c).map(|_| ()))
    }
}

pub fn build_cognitive_prompt(
    state: &SimulationState,
    perceived: &PerceivedState,
    registry: &Registry,
    memory: &AgentMemory,
    prompts: &PromptSet,
    limits: &PromptLimits,
) -> ProviderRequest {
    let mut ctx = PromptContext::new(state, perceived, memory, limits);
    ctx.components = components_section(registry.entries());
    ProviderRequest { capability: None, prompt: ctx.render(&prompts.select, limits.max_chars), schema_id: SchemaId::Select }
}

pub fn select_component(
    policy: &Policy,
    state: &SimulationState,
    perceived: &PerceivedState,
    ctx: &SelectContext<'_>,
) -> Result<Selected, PolicyError> {
    let plain = |id: &str| -> Result<Selected, PolicyError> {
        Ok(Selected { component: ctx.registry.resolve(id)?, call: None, warnings: Vec::new() })
    };
    match policy {
        Policy::Rules(r) => plain(r.select(state).0),
        Policy::Learned(l) => plain(l.classifier.predict(&extract_features(state))),
        Policy::Agentic(a) => {
            let provider = ctx.provider.ok_or(PolicyError::NoProvider)?;
            let request = build_cognitive_prompt(state, perceived, ctx.registry, ctx.memory, ctx.prompts, ctx.limits);
            let fallback = |warning: String, call: Option<CapabilityCall>| -> Result<Selected, PolicyError> {
                Ok(Selected { component: ctx.registry.resolve(&a.default)?, call, warnings: vec![warning] })
            };
            match call_provider(provider, &request) {
                Ok(Parsed::Selection(s)) => {
                    let call = CapabilityCall { kind: "select".into(), thoughts: s.thoughts, reflections: s.reflections };
                    match ctx.registry.resolve(&s.chosen_component) {
                        Ok(component) => Ok(Selected { component, call: Some(call), warnings: Vec::new() }),
                        Err(e) => fallback(format!("{e}; using default {}", a.default), Some(call)),
                    }
                }
                Ok(Parsed::Capability(_)) => unreachable!("select schema never parses as a capability"),
                Err(e @ CapabilityError::Provider { .. }) => Err(PolicyError::Provider(e)),
                Err(e) => fallback(format!("{e}; using default {}", a.default), None),
            }
        }
    }
}
