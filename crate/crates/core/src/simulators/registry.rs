//! Registered action-generating components.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentKind {
    QueryGeneration,
    RelevanceDecision,
    StoppingDecision,
    AgentCapability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRef {
    pub component_id: String,
    pub kind: ComponentKind,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub id: String,
    pub kind: ComponentKind,
    pub description: String,
}

pub mod ids {
    pub const QUERY_GENERATION: &str = "QueryGeneration";
    pub const QUERY_REFINE: &str = "QueryRefineSimulator";
    pub const RELEVANCE_DECISION: &str = "RelevanceDecision";
    pub const STOPPING_DECISION: &str = "StoppingDecision";
    pub const AGENT_PERCEIVE: &str = "AgentPerceive";
    pub const AGENT_PLAN: &str = "AgentPlan";
    pub const AGENT_ACT: &str = "AgentAct";
    pub const AGENT_REFLECT: &str = "AgentReflect";
    pub const AGENT_WONDER: &str = "AgentWonder";
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown component \"{id}\"; registered components: {}", registered.join(", "))]
pub struct UnknownComponent {
    pub id: String,
    pub registered: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("component \"{0}\" is registered twice")]
pub struct DuplicateComponent(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    entries: Vec<ComponentInfo>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: Vec::new() }
    }

    pub fn builtin() -> Self {
        use ComponentKind::*;
        let mut r = Registry::empty();
        let table = [
            (ids::QUERY_GENERATION, QueryGeneration, "Issue a query built from the information need's most frequent terms"),
            (ids::QUERY_REFINE, QueryGeneration, "Reformulate the last query with a term learned from documents"),
            (ids::RELEVANCE_DECISION, RelevanceDecision, "Scan results, click promising ones, read and save relevant documents"),
            (ids::STOPPING_DECISION, StoppingDecision, "End the search session"),
            (ids::AGENT_PERCEIVE, AgentCapability, "Agent summarizes the current page, then acts"),
            (ids::AGENT_PLAN, AgentCapability, "Agent drafts a high-level plan of sub-goals, then acts"),
            (ids::AGENT_ACT, AgentCapability, "Agent chooses one concrete interface action"),
            (ids::AGENT_REFLECT, AgentCapability, "Agent reviews past actions and adjusts strategy, then acts"),
            (ids::AGENT_WONDER, AgentCapability, "Agent raises new sub-questions, then acts"),
        ];
        for (id, kind, desc) in table {
            r.register(id, kind, desc).expect("built-in ids are unique");
        }
        r
    }

    pub fn register(&mut self, id: &str, kind: ComponentKind, description: &str) -> Result<(), DuplicateComponent> {
        if self.contains(id) {
            return Err(DuplicateComponent(id.to_string()));
        }
        self.entries.push(ComponentInfo { id: id.to_string(), kind, description: description.to_string() });
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    pub fn get(&self, id: &str) -> Result<&ComponentInfo, UnknownComponent> {
        self.entries.iter().find(|e| e.id == id).ok_or_else(|| self.unknown(id))
    }

    pub fn unknown(&self, id: &str) -> UnknownComponent {
        UnknownComponent { id: id.to_string(), registered: self.ids().into_iter().map(String::from).collect() }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn entries(&self) -> &[ComponentInfo] {
        &self.entries
    }

    pub fn resolve(&self, id: &str) -> Result<ComponentRef, UnknownComponent> {
        let info = self.get(id)?;
        Ok(ComponentRef { component_id: info.id.clone(), kind: info.kind, params: BTreeMap::new() })
    }
}
